import pytest
from hypothesis import given, strategies as st

from allpairs import perfmodel
from allpairs.perfmodel import StageCosts, efficiency, pair_count, report, t_cpu, t_gpu, t_io, t_min
from allpairs.presets import BIOINFORMATICS, FORENSICS, MICROSCOPY


def test_pair_count():
    assert pair_count(2) == 1
    assert pair_count(64) == 2016
    assert pair_count(4980) == 12_397_710
    assert pair_count(2500) == 3_123_750
    assert pair_count(0) == 0


def test_t_gpu_forensics_lower_bound():
    costs = FORENSICS.stage_costs()
    assert t_gpu(4980, 1.0, costs) == pytest.approx(13_739.6, abs=0.1)


def test_t_gpu_zero_costs_and_linearity():
    zero = StageCosts()
    assert t_gpu(100, 1.0, zero) == 0.0
    costs = StageCosts(t_preprocess=0.01, t_comparison=0.002)
    base_pre = 1.0 * 100 * 0.01
    assert t_gpu(100, 2.0, costs) - t_gpu(100, 1.0, costs) == pytest.approx(base_pre)


def test_t_cpu_bioinformatics_parse_term():
    costs = BIOINFORMATICS.stage_costs()
    assert t_cpu(2500, 1.0, costs) == pytest.approx(2500 * 36.9e-3)
    # zero post-process cost: independent of the pair count entirely
    assert t_cpu(2500, 1.0, costs) == t_cpu(2500, 1.0, costs)
    bigger = StageCosts(t_parse=36.9e-3, t_postprocess=0.0)
    assert t_cpu(5000, 1.0, bigger) == pytest.approx(5000 * 36.9e-3)


def test_t_cpu_zero():
    assert t_cpu(10, 1.0, StageCosts()) == 0.0


def test_t_io_forensics():
    costs = FORENSICS.stage_costs(io_bandwidth=400e6)
    assert t_io(4980, 1.0, costs) == pytest.approx(48.5, abs=0.1)
    assert t_io(4980, 2.0, costs) == pytest.approx(2 * t_io(4980, 1.0, costs))
    assert t_io(4980, 1.0, FORENSICS.stage_costs()) == 0.0  # infinite bandwidth


def test_t_min_definition():
    costs = FORENSICS.stage_costs()
    assert t_min(4980, costs) == t_gpu(4980, 1.0, costs)
    two = StageCosts(t_preprocess=0.5, t_comparison=0.25)
    assert t_min(2, two) == pytest.approx(0.5 * 2 + 0.25)


def test_t_min_microscopy_matches_reported_pair_total():
    # The microscopy workload's published pair total (130,816) corresponds to
    # 512 items; 256 items yield 32,640 pairs. Check both item counts.
    costs = MICROSCOPY.stage_costs()
    assert t_min(512, costs) == pytest.approx(130_816 * 564.3e-3, rel=1e-12)
    assert t_min(512, costs) == pytest.approx(73_820, abs=1.0)
    assert t_min(256, costs) == pytest.approx(32_640 * 564.3e-3, rel=1e-12)


def test_efficiency():
    assert efficiency(100.0, 1, 100.0) == 1.0
    assert efficiency(100.0, 4, 25.0) == 1.0
    assert efficiency(100.0, 4, 50.0) == 0.5
    assert perfmodel.REFERENCE_EFFICIENCY["forensics"] == 0.946
    assert perfmodel.REFERENCE_EFFICIENCY["bioinformatics"] == 0.885
    assert perfmodel.REFERENCE_EFFICIENCY["microscopy"] == 0.992


def test_efficiency_validation():
    with pytest.raises(ValueError):
        efficiency(1.0, 0, 1.0)
    with pytest.raises(ValueError):
        efficiency(1.0, 1, 0.0)


def test_report_includes_efficiency():
    costs = StageCosts(t_preprocess=0.01, t_comparison=0.001)
    rep = report(10, 1.0, costs, p=1, t_measured=t_min(10, costs))
    assert rep.efficiency == pytest.approx(1.0)
    assert "efficiency" in rep.as_dict()
    assert report(10, 1.0, costs).efficiency is None


@given(
    n=st.integers(min_value=2, max_value=1000),
    r1=st.floats(min_value=1.0, max_value=50.0),
    dr=st.floats(min_value=0.0, max_value=50.0),
    pre=st.floats(min_value=0.0, max_value=10.0),
    comp=st.floats(min_value=0.0, max_value=10.0),
)
def test_monotone_in_r_and_n(n, r1, dr, pre, comp):
    costs = StageCosts(t_parse=pre, t_preprocess=pre, t_comparison=comp,
                       t_postprocess=comp, mean_file_bytes=1e6, io_bandwidth=1e8)
    for fn in (t_gpu, t_cpu, t_io):
        assert fn(n, r1 + dr, costs) >= fn(n, r1, costs) - 1e-12
        assert fn(n + 1, r1, costs) >= fn(n, r1, costs) - 1e-12


def test_invalid_inputs():
    with pytest.raises(ValueError):
        t_gpu(10, 0.5, StageCosts())
    with pytest.raises(ValueError):
        StageCosts(t_parse=-1.0)
    with pytest.raises(ValueError):
        StageCosts(io_bandwidth=0.0)
