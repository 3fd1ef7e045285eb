//! Placeholder library so the benches have a package to live in; the real
//! content is under `benches/`.
