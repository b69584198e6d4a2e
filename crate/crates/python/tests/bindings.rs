use pyo3::ffi::c_str;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyModule};

fn with_module(script: &std::ffi::CStr) {
    Python::initialize();
    Python::attach(|py| {
        let m = PyModule::new(py, "takagi_lab").unwrap();
        takagi_lab_py::takagi_lab_py(&m).unwrap();
        let globals = PyDict::new(py);
        globals.set_item("tl", m).unwrap();
        if let Err(e) = py.run(script, Some(&globals), None) {
            e.print(py);
            panic!("script failed");
        }
    });
}

#[test]
fn evaluation_and_walks() {
    with_module(c_str!(
        r#"
f = tl.FractalFunction(2)
assert f.eval("1/2")[0] == 0.5
assert abs(f.eval(0.25)[0] - 0.5) < 1e-12
assert f.base == 2 and f.memory_parameter == 0.5
p = tl.ErwvrpParams(0.75, "const", 100)
assert p.alpha == 0.5
assert abs(p.second_moment(0, 1) - 1.0) < 1e-15
assert abs(p.second_moment(0, 2) - 3.0) < 1e-15
assert tl.build_blocks(tl.WeightSequence("const"), 1.0, 6) == [0, 1, 2, 4, 6, 9]
"#
    ));
}

#[test]
fn errors_become_value_errors() {
    with_module(c_str!(
        r#"
for bad in (lambda: tl.ErwvrpParams(1.5), lambda: tl.WeightSequence("nope"), lambda: tl.FractalFunction(1),
            lambda: tl.run_config("experiment=unknown")):
    try:
        bad()
    except ValueError:
        pass
    else:
        raise AssertionError("accepted")
"#
    ));
}
