use pyo3::prelude::*;

#[pymodule]
fn pqlab(_m: &Bound<PyModule>) -> PyResult<()> { Ok(()) }
