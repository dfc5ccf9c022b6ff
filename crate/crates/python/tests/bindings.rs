use pyo3::prelude::*;
use pyo3::types::PyDict;

fn run(code: &std::ffi::CStr) {
    Python::attach(|py| {
        let locals = PyDict::new(py);
        locals.set_item("synrisk", pyo3::wrap_pymodule!(synrisk::synrisk)(py)).unwrap();
        if let Err(e) = py.run(code, None, Some(&locals)) {
            e.print(py);
            panic!("python check failed");
        }
    });
}

#[test]
fn clearing_round_trip() {
    run(c"
s = synrisk.FinancialSystem([[0.0, 2.0], [1.0, 0.0]], [0.5, 0.5])
r = s.clear()
assert r['defaults'] == [0] and abs(r['p'][0] - 1.5) < 1e-12
assert len(s) == 2
");
}

#[test]
fn errors_become_python_exceptions() {
    run(c"
try:
    synrisk.FinancialSystem([[0.0, -1.0], [0.0, 0.0]], [0.0, 0.0])
except ValueError as e:
    assert 'invalid parameter' in str(e)
else:
    raise AssertionError('negative obligation accepted')
try:
    synrisk.PortfolioSystem([[1.0]], [1.0], [0.2]).fire_sale('nowhere')
except ValueError:
    pass
else:
    raise AssertionError('bad shock accepted')
");
}

#[test]
fn models_return_plain_data() {
    run(c"
t = synrisk.cascade_theory(3.0, 0.18)
assert isinstance(t['rho'], float) and t['first_order']['holds']
d = synrisk.ExposureSystem.from_leverage([[0.0, 0.5], [0.5, 0.0]]).debtrank([0.4, 0.0], variant='iterated')
assert d['converged']
out = synrisk.InterbankSystem(3, [(0, 1), (1, 2), (2, 0)], 0.2).cascade([0])
assert sorted(out['finally_defaulted']) == [0, 1, 2]
rec = synrisk.run_experiment({'model': 'structure', 'params': {'n': 20, 'core': 5}, 'trials': 2, 'seed': 1})
assert len(rec['rows']) == 2 and rec['config_digest']
");
}
