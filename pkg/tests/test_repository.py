import csv
import json

import pytest

from dsslab.errors import StorageError
from dsslab.schemas import CheckOutcome, SolverSnapshot, Summary
from dsslab.storage.repository import ArtifactRepository


@pytest.fixture
def repo(tmp_path) -> ArtifactRepository:
    return ArtifactRepository(tmp_path / "run")


class TestArtifactRepository:
    def test_creates_directory(self, tmp_path):
        ArtifactRepository(tmp_path / "a" / "b")
        assert (tmp_path / "a" / "b").is_dir()

    def test_certificate_json(self, repo):
        path = repo.write_certificate({"mu": 0.1, "feasible": True})
        assert json.loads(path.read_text(encoding="utf-8")) == {"mu": 0.1, "feasible": True}

    def test_summary_round_trip(self, repo):
        summary = Summary(name="x", seed=3, exit_code=1,
                          checks={"dss": CheckOutcome(status="fail", detail="slack")},
                          ultimate_maxnorm=0.125)
        repo.write_summary(summary)
        loaded = ArtifactRepository.load_summary(repo.out_dir)
        assert loaded == summary

    def test_missing_summary(self, tmp_path):
        with pytest.raises(StorageError):
            ArtifactRepository.load_summary(tmp_path / "nowhere")

    def test_boundary_header(self, repo):
        path = repo.write_boundary([[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]], n=2, m=1)
        with path.open(encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["t", "X1_1", "X1_2", "eta_1", "eta_2", "u_1", "d_1", "d_2"]
        assert len(rows) == 2

    def test_field_and_monitor_headers(self, repo):
        field = repo.write_field([[0.0, 0.5, 1.0]], n=1)
        monitor = repo.write_monitor([])
        assert field.read_text(encoding="utf-8").splitlines()[0] == "t,z,X_1"
        assert monitor.read_text(encoding="utf-8").splitlines()[0].startswith("t,V1,V2,V3,V,maxnorm")

    def test_snapshot_round_trip_is_exact(self, repo):
        snap = SolverSnapshot(mode="exact", M=16, dt=0.1, step=7, eta=[0.1 + 0.2, 1.0 / 3.0],
                              history=[[1e-300, -2.5]], history_newest=7)
        repo.save_snapshot(snap)
        assert repo.load_snapshot() == snap

    def test_unreadable_snapshot(self, repo):
        with pytest.raises(StorageError):
            repo.load_snapshot("missing.json")

    def test_directory_blocked_by_file(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x", encoding="utf-8")
        with pytest.raises(StorageError):
            ArtifactRepository(blocker / "sub")
