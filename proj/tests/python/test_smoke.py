import json
import math

import numpy as np
import pytest

import horolab


def test_hyperbolic_profile():
    h3 = horolab.hyperbolic(3, 1.0)
    v = horolab.sample_unit_vectors(h3, horolab.default_anchor(h3), 1, 7)[0]
    p = horolab.profile(h3, v)
    assert p.h == pytest.approx(2.0, abs=1e-5)
    assert p.rank == 1
    assert p.det_trace_equality
    np.testing.assert_allclose(p.D, 2.0 * np.eye(2), atol=1e-5)


def test_model_from_descriptor():
    spec = horolab.make_model(
        {
            "model": "product",
            "factors": [
                {"model": "hyperbolic", "params": {"n": 2, "k": 1}},
                {"model": "euclidean", "params": {"n": 1}},
            ],
        }
    )
    assert spec.dimension == 3
    assert spec.is_product
    v = horolab.TangentVector(np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.6, 0.8]))
    assert horolab.profile(spec, v).h == pytest.approx(0.6, abs=1e-5)
    x = np.array([0.3, math.exp(0.5), 1.25])
    assert horolab.busemann(spec, v, x) == pytest.approx(0.6 * -0.5 + 0.8 * -1.25, abs=1e-5)


def test_det_a_and_conjugate_scan():
    h3 = horolab.hyperbolic(3)
    v = horolab.TangentVector(np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, 1.0]))
    assert horolab.det_a(h3, v, 1.0) == pytest.approx(math.sinh(1.0) ** 2, abs=1e-6)
    scan = horolab.conjugate_scan(h3, v, 5.0, 0.05)
    assert scan.first_conjugate_time is None
    assert len(scan.t_grid) == len(scan.det_values)


def test_datri_separates_models():
    h3 = horolab.hyperbolic(3)
    vs = horolab.sample_unit_vectors(h3, horolab.default_anchor(h3), 6, 1)
    r = horolab.datri_check(h3, vs, [0.5, 1.0], jobs=2)
    assert r.max_asymmetry <= 1e-6
    assert r.harmonic_spread <= 1e-6


def test_errors_carry_kind():
    with pytest.raises(horolab.HorolabError) as info:
        horolab.hyperbolic(3, -1.0)
    assert info.value.kind == "invalid-params"
    with pytest.raises(horolab.HorolabError) as info:
        horolab.run_config("manifold: {model: euclidean, params: {n: 2}}\nexperiment: nope\n")
    assert info.value.kind == "config"
    assert "experiment" in str(info.value)


def test_run_config_is_deterministic():
    text = """
manifold: {model: hyperbolic, params: {n: 3, k: 1}}
experiment: profile
sampling: {seed: 7, count: 3}
parameters: {expected_h: 2.0}
output: {format: csv}
"""
    a = horolab.run_config(text)
    b = horolab.run_config(text, jobs=3)
    assert a["pass"]
    assert a["csv"] == b["csv"]
    assert a["csv"].splitlines()[0] == "v_index,h,det_D,trace_D,rank,norm_bound_ok,det_trace_ok"
    doc = json.loads(a["json"])
    assert doc["rows"][0]["h"] == a["rows"][0]["h"]
    assert set(horolab.experiments()) >= {"profile", "sl2-verify", "datri-check"}
