import csv
import json

import pytest

import geodesic_lab
from geodesic_lab import (
    EXIT_BOUND_VIOLATION,
    EXIT_CERTIFICATION,
    EXIT_OK,
    EXIT_USAGE,
    GeodesicLabOrchestrator,
    main,
)
from geolab.errors import BoundViolationError, CertificationError


@pytest.fixture
def lab(tmp_path, monkeypatch):
    for name in ("GEODESIC_LAB_CACHE", "GEODESIC_LAB_OUT", "GEODESIC_LAB_WORKERS"):
        monkeypatch.delenv(name, raising=False)
    out, cache = tmp_path / "out", tmp_path / "cache"

    def run(*argv):
        return main([*argv, "--out", str(out), "--cache", str(cache), "--quiet"])

    run.out = out
    return run


def _snapshot(directory):
    return {path.name: path.read_bytes() for path in sorted(directory.iterdir())}


def test_partition_run_is_reproducible(lab):
    assert lab("partition", "--radius", "4") == EXIT_OK
    first = _snapshot(lab.out)
    assert {"partition.json", "transitions.csv", "summary.json", "manifest.json"} <= set(first)
    summary = json.loads(first["summary.json"])
    assert summary["irreducible"] and summary["aperiodic"]
    assert summary["primitivity_index"] <= 3

    # second run reads the cache
    assert lab("partition", "--radius", "4") == EXIT_OK
    assert _snapshot(lab.out) == first


def test_manifest_hashes_every_output(lab):
    assert lab("partition", "--radius", "4") == EXIT_OK
    manifest = json.loads((lab.out / "manifest.json").read_text())
    assert manifest["command"] == "partition"
    assert manifest["params"]["radius"] == 4.0
    assert set(manifest["output_hashes"]) == {"partition.json", "transitions.csv", "summary.json"}
    assert "partition-R4" in manifest["input_hashes"]


def test_enumerate_with_modulus(lab):
    assert lab("enumerate", "--radius", "4", "--ball", "8", "--mod", "1+i") == EXIT_OK
    with (lab.out / "geodesics.csv").open() as handle:
        geodesics = list(csv.DictReader(handle))
    with (lab.out / "equidist.csv").open() as handle:
        bins = list(csv.DictReader(handle))
    assert geodesics
    assert len(bins) == 6
    assert sum(int(row["count"]) for row in bins) == len(geodesics)


def test_charsums_run(lab):
    assert lab("charsums", "--mod", "2+i", "--xi", "1,1,1,1") == EXIT_OK
    lines = (lab.out / "charsum_margins.csv").read_text().splitlines()
    assert lines[0] == "q,character_index,xi,abs_sum,bound,margin"
    assert len(lines) == 1 + 4


def test_harvest_run(lab):
    assert lab("harvest", "--radius", "4", "--ball", "8") == EXIT_OK
    header = (lab.out / "harvest.csv").read_text().splitlines()[0]
    assert header == "t_re,t_im,M,disc_re,disc_im,squarefree"


@pytest.mark.parametrize(
    "argv",
    [
        ["enumerate", "--mod", "0"],
        ["enumerate", "--ball", "1"],
        ["charsums", "--mod", "1+i", "--xi", "1,1"],
        ["charsums"],
        ["partition", "--radius", "2"],
        ["frobnicate"],
        ["charsums", "--mod", "2+i", "--all-xi", "--xi", "1,1,1,1"],
    ],
)
def test_invalid_input_exits_with_usage_code(lab, argv):
    assert lab(*argv) == EXIT_USAGE


def test_bound_violation_still_writes_the_manifest(lab, monkeypatch):
    def violate(self):
        raise BoundViolationError("sum exceeds bound", 2)

    monkeypatch.setattr(GeodesicLabOrchestrator, "_run_charsums", violate)
    assert lab("charsums", "--mod", "1+i") == EXIT_BOUND_VIOLATION
    assert (lab.out / "manifest.json").exists()


def test_certification_failure_exit_code(lab, monkeypatch):
    def refuse(*args, **kwargs):
        raise CertificationError("no exact certificate")

    monkeypatch.setattr(geodesic_lab, "build_transitions", refuse)
    assert lab("partition", "--radius", "4") == EXIT_CERTIFICATION


@pytest.mark.slow
def test_delta_run(lab):
    assert lab("delta", "--radius", "4", "--max-depth", "2", "--s-step", "0.25") == EXIT_OK
    delta = json.loads((lab.out / "delta.json").read_text())
    lo, value, hi = (float(delta[key]) for key in ("lo", "delta", "hi"))
    assert 0 < lo <= value <= hi < 2
    lines = (lab.out / "pressure.csv").read_text().splitlines()
    assert len(lines) == 1 + 9


@pytest.mark.slow
def test_sieve_run(lab):
    assert lab("sieve", "--radius", "4", "-X", "4", "-Y", "3", "-Z", "3", "--level", "20") == EXIT_OK
    lines = (lab.out / "ledger.csv").read_text().splitlines()
    assert lines[0] == "q_re,q_im,Uq,beta_num,beta_den,main,remainder"
