use super::{top_k_result, QueryRequest, QueryResult};
use crate::classification::EglGroup;
use crate::error::{Error, Result};

/// Expected gradient length: `Σ_c p(c|x) · ‖∇L(x, c)‖` over the parameter
/// group selected by the variant.
pub fn query_egl(req: &mut QueryRequest<'_>, group: EglGroup) -> Result<QueryResult> {
    req.check_batch()?;
    if req.classifier.label_space().is_multi_label() {
        return Err(Error::MultiLabelUnsupported("egl".into()));
    }
    let probs = req.classifier.predict_proba(req.features, &req.candidates)?;
    let norms = req
        .classifier
        .egl_gradient_norms(req.features, &req.candidates, group)?;
    let scores = probs
        .rows()
        .into_iter()
        .zip(norms.rows())
        .map(|(p, g)| p.dot(&g))
        .collect();
    Ok(top_k_result(&req.candidates, scores, req.k))
}
