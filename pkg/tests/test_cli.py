"""Command-line pipeline: file formats, shard invariance and the proof driver."""

import numpy as np
import pytest

from fibwild.attractor import SegmentSet, zeta_upper
from fibwild.cli import (
    CorruptEndpointFile,
    JobShard,
    MissingData,
    ShardOutOfRange,
    load_element,
    main,
    merge_shards,
    read_endpoints,
    read_shard_output,
    save_element,
    write_endpoints,
)


@pytest.fixture
def data(tmp_path, monkeypatch, run51, run38):
    root = tmp_path / "Data"
    monkeypatch.setenv("FIBWILD_DATA", str(root))
    save_element(run51.element, run51.certificate, root)
    save_element(run38.element, run38.certificate, root)
    return root


def run(*argv):
    return main([str(a) for a in argv])


def test_eta_shards_concatenate_to_the_single_run(data, tmp_path):
    one, three = tmp_path / "one", tmp_path / "three"
    assert run("eta", 5.1, 2, 300, 100, 0.01, 1, 1, "--outdir", one) == 0
    for i in (1, 2, 3):
        assert run("eta", 5.1, 2, 300, 100, 0.01, 3, i, "--outdir", three) == 0
    _, whole = merge_shards([one / "output_eta.5.1.300.3.1"])
    _, merged = merge_shards([three / f"output_eta.5.1.300.3.{i}" for i in (1, 2, 3)])
    assert merged == whole


def test_zeta_below_shards_concatenate_to_the_single_run(data, tmp_path):
    for m in (1, 2):
        for i in range(1, m + 1):
            assert run("zeta_below", 5.1, 2, 60, 200, 200, 0.01, 0.01, m, i, "--outdir", tmp_path / str(m)) == 0
    _, a = merge_shards([tmp_path / "1" / "output_zeta_below.5.1.60.3.1"])
    _, b = merge_shards([tmp_path / "2" / f"output_zeta_below.5.1.60.3.{i}" for i in (1, 2)])
    assert a == b


def test_reruns_are_byte_identical(data, tmp_path):
    for k in (1, 2):
        assert run("eta", 5.1, 2, 200, 100, 0.01, 2, 2, "--outdir", tmp_path / str(k)) == 0
    name = "output_eta.5.1.200.3.2"
    assert (tmp_path / "1" / name).read_bytes() == (tmp_path / "2" / name).read_bytes()


def test_merge_refuses_shards_of_another_run(data, tmp_path):
    run("eta", 5.1, 2, 200, 100, 0.01, 2, 1, "--outdir", tmp_path)
    with pytest.raises(ShardOutOfRange):
        merge_shards([tmp_path / "output_eta.5.1.200.3.1"])


def test_endpoint_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(5)
    lo = np.sort(rng.uniform(-1, 1, 500))
    hi = lo + rng.uniform(0, 1e-9, 500)
    write_endpoints(tmp_path / "l", tmp_path / "r", lo, hi)
    a, b = read_endpoints(tmp_path / "l", tmp_path / "r")
    assert np.array_equal(a, lo) and np.array_equal(b, hi)


def test_shard_output_round_trip(tmp_path):
    from fibwild.cli import write_shard_output

    S = SegmentSet.from_pairs([[-0.5, -0.25], [0.1, 0.3 + 1e-17]])
    write_shard_output(tmp_path / "o", {"kind": "eta_upper", "m": 1, "i": 1}, S)
    header, back = read_shard_output(tmp_path / "o")
    assert back == S and header["kind"] == "eta_upper"


def test_reduce_intervals_takes_the_union(data):
    write_endpoints(data / "leftpoints_zeta_5.1_3_0", data / "rightpoints_zeta_5.1_3_0",
                    np.array([0.0, 0.5]), np.array([1.0, 2.0]))
    assert run("reduce_intervals", 5.1, 2, 0) == 0
    lo, hi = read_endpoints(data / "lleftpoints_zeta_5.1_3_0", data / "rrightpoints_zeta_5.1_3_0")
    assert lo.tolist() == [0.0] and hi.tolist() == [2.0]


def test_mismatched_endpoint_files_are_rejected(tmp_path):
    (tmp_path / "l").write_text("0x0p+0\n0x1p-1\n")
    (tmp_path / "r").write_text("0x1p+0\n")
    with pytest.raises(CorruptEndpointFile):
        read_endpoints(tmp_path / "l", tmp_path / "r")


def test_errors_map_to_exit_status_one(data, capsys):
    assert run("reduce_intervals", 3.8, 2, 0) == 1
    assert "MissingData" in capsys.readouterr().err
    assert run("eta", 5.1, 2, 100, 10, 0.1, 2, 3) == 1
    assert "ShardOutOfRange" in capsys.readouterr().err


def test_missing_element_is_reported(tmp_path, monkeypatch):
    monkeypatch.setenv("FIBWILD_DATA", str(tmp_path))
    with pytest.raises(MissingData):
        load_element(5.1)


def test_job_shard_bounds():
    assert JobShard(3, 3).range(10) == (6, 10)
    with pytest.raises(ShardOutOfRange):
        JobShard(3, 0)


def test_preimage_pipeline_matches_in_process_bound(data, capsys):
    assert run("preimages_zeta", 5.1, 3, 2) == 0
    Q, P = map(int, capsys.readouterr().out.split())
    M = P - Q + 1
    for i in range(1, M + 1):
        assert run("preimages_zeta_next", 5.1, 3, Q, P, M, 2, i) == 0
    assert run("reduce_intervals", 5.1, 3, M) == 0
    capsys.readouterr()
    for i in range(M + 1):
        assert run("preimages_ren_zeta_next", 5.1, 3, M, 3, i) == 0
    assert run("compute_zeta", 5.1, 3, M, 3) == 0
    text = capsys.readouterr().out
    hi = float.fromhex(next(l for l in text.splitlines() if l.startswith("zeta_hi")).split()[2])
    ref = zeta_upper(load_element(5.1), 4, 4, 3)
    assert hi == pytest.approx(ref.zeta_hi, abs=1e-12)
    assert (data / "report_zeta_5.1_4").exists()


def test_prove_with_starved_budgets_is_indeterminate(data):
    assert run("prove", 3.8, "--budget", 1) == 2
    assert (data / "report_prove_3.8_9_desk").exists()


def test_prove_reports_failed_certificate(tmp_path, monkeypatch):
    from types import SimpleNamespace

    import fibwild.cli as cli

    monkeypatch.setenv("FIBWILD_DATA", str(tmp_path))
    failed = SimpleNamespace(certificate=SimpleNamespace(valid=False), element=None)
    monkeypatch.setattr(cli, "_certify", lambda *args: failed)
    assert run("prove", 5.1, "--budget", 1) == 1
