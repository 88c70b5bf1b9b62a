use axum::response::Html;

/// Minimal labeling page served when no UI bundle is configured.
pub async fn fallback_page() -> Html<&'static str> {
    Html(PAGE)
}

const PAGE: &str = r#"<!doctype html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>Annotation</title>
<style>
body { font-family: sans-serif; max-width: 52rem; margin: 2rem auto; padding: 0 1rem; }
.doc { border: 1px solid #ccc; border-radius: 4px; padding: .6rem; margin: .6rem 0; }
.doc p { margin: 0 0 .4rem; white-space: pre-wrap; }
#advice { font-weight: bold; }
</style>
</head>
<body>
<h1>Annotation</h1>
<p id="status">Loading...</p>
<p id="advice"></p>
<form id="batch"></form>
<button id="submit" type="button">Submit batch</button>
<p><a id="csv">Export CSV</a> | <a id="jsonl">Export JSONL</a></p>
<script>
let session, classes, multi, seq;
const $ = (id) => document.getElementById(id);
async function call(method, path, body) {
  const r = await fetch(path, { method, headers: { "content-type": "application/json" }, body: body && JSON.stringify(body) });
  return { status: r.status, body: await r.json() };
}
async function refreshStatus() {
  const s = (await call("GET", `/api/session/${session}/status`)).body;
  $("status").textContent = `Round ${s.round}: ${s.labeled} labeled, ${s.unlabeled} unlabeled`;
  $("advice").textContent = s.stopping.should_stop ? `Stopping advised (${s.stopping.name})` : "";
}
async function loadBatch() {
  const b = (await call("GET", `/api/session/${session}/batch`)).body;
  seq = b.seq;
  const form = $("batch");
  form.innerHTML = "";
  if (b.done) { form.textContent = "All documents are labeled."; $("submit").disabled = true; return; }
  for (const d of b.batch) {
    const div = document.createElement("div");
    div.className = "doc";
    div.dataset.id = d.doc_id;
    const p = document.createElement("p");
    p.textContent = d.text;
    div.appendChild(p);
    for (const c of classes) {
      const label = document.createElement("label");
      const input = document.createElement("input");
      input.type = multi ? "checkbox" : "radio";
      input.name = `doc-${d.doc_id}`;
      input.value = c;
      label.append(input, " ", c, " ");
      div.appendChild(label);
    }
    form.appendChild(div);
  }
}
$("submit").onclick = async () => {
  const labels = {};
  for (const div of document.querySelectorAll(".doc")) {
    labels[div.dataset.id] = [...div.querySelectorAll("input:checked")].map((i) => i.value);
  }
  const r = await call("POST", `/api/session/${session}/labels`, { seq, labels });
  if (r.status !== 200) alert(`${r.body.error}: ${JSON.stringify(r.body.detail)}`);
  await refreshStatus();
  await loadBatch();
};
(async () => {
  const s = (await call("POST", "/api/session")).body;
  session = s.session_id; classes = s.classes; multi = s.mode === "multi_label";
  $("csv").href = `/api/session/${session}/export?format=csv`;
  $("jsonl").href = `/api/session/${session}/export?format=jsonl`;
  await refreshStatus();
  await loadBatch();
})();
</script>
</body>
</html>
"#;
