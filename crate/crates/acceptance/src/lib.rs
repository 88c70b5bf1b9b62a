//! Acceptance suite for the workspace. Everything lives in the `acceptance`
//! test target: `cargo test -p al-acceptance --test acceptance`.
