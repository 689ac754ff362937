import json
import math

import pytest

import nctorus


def test_product_rule_and_adjoint():
    th = nctorus.golden()
    u = nctorus.NcElement.monomial(1, 0, 1.0, th)
    v = nctorus.NcElement.monomial(0, 1, 1.0, th)
    vu = v * u
    uv = u * v
    assert abs(vu.coeff(1, 1) - complex(math.cos(2 * math.pi * th), math.sin(2 * math.pi * th))) < 1e-14
    assert abs(uv.coeff(1, 1) - 1.0) < 1e-15
    a = u + 0.5j * v
    assert nctorus.max_abs_difference(a.adjoint().adjoint(), a) < 1e-15
    assert abs((a.adjoint() * a).trace() - 1.25) < 1e-14


def test_element_json_sorted_and_unsorted():
    a = nctorus.NcElement.from_json(json.dumps({"theta": 0.3, "coeffs": [[2, 0, 1, 0], [-1, 1, 0, 2]]}))
    out = json.loads(a.to_json())
    assert out["coeffs"] == [[-1, 1, 0.0, 2.0], [2, 0, 1.0, 0.0]]


def test_flat_weyl_slope():
    ev = nctorus.flat_spectrum(0.0, 1.0, 120)
    fit = nctorus.weyl_slope(ev, 120, nctorus.box_ceiling(0.0, 1.0, 120))
    assert abs(fit["slope"] / math.pi - 1.0) < 0.03


def test_residue_anchor():
    assert abs(nctorus.resolvent_residue() - 2 * math.pi) < 1e-10


def test_dixmier_harmonic():
    est = nctorus.dixmier_estimate([1.0 / n for n in range(1, 20001)])
    assert abs(est["value"] - 1.0) < 1e-2
    with pytest.raises(nctorus.Error):
        nctorus.dixmier_estimate([1.0] * 10)


def test_config_normalization():
    cfg = nctorus.normalize_config({"h": [[1, 0, 0.4, 0.0]]})
    assert cfg["h"] == [[-1, 0, 0.4, 0.0], [1, 0, 0.4, 0.0]]
    assert cfg == nctorus.default_config()
    with pytest.raises(nctorus.Error, match=":1: unknown key"):
        nctorus.normalize_config({"bandwith": 4})


def test_compose():
    p = {"top_order": 1, "complete": True, "layers": {"1": {"1": {"theta": 0.3, "coeffs": [[1, 0, 1, 0]]}}}}
    s = nctorus.compose(p, p, 0)
    assert s["top_order"] == 2
    assert s["layers"]["2"]["2"]["coeffs"] == [[2, 0, 1.0, 0.0]]


def test_runs(tmp_path):
    ok, report = nctorus.run_weyl(
        {"h": [], "weyl": {"spectrum": "flat-analytic", "analytic_bandwidth": 80, "tolerance": 0.03}}, tmp_path
    )
    assert ok and report["schema_version"] == 1
    assert (tmp_path / "weyl" / "staircase.csv").read_bytes().startswith(b"lambda,count\r\n")
    ok, report = nctorus.run_residue({"connes": {"preset": "resolvent"}}, tmp_path)
    assert ok and abs(report["residue"][0] - 2 * math.pi) < 1e-10


def test_acceptance_criterion():
    r = nctorus.run_criterion(5)
    assert r["pass"], r["detail"]
