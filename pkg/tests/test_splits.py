import pytest

from longalign import splits, synth
from longalign.core import UtteranceManifestRow
from longalign.errors import InfeasibleError


def row(utt, doc, spk, gender="M", dur=600.0):
    return UtteranceManifestRow(utt_id=utt, doc_id=doc, speaker_id=spk, gender=gender,
                                duration_s=dur, start_s=0.0, end_s=dur,
                                text_src="", text_tgt="")


def specs_503025():
    return [
        splits.SplitSpec("train", 0.5),
        splits.SplitSpec("dev", 0.25, require_speaker_disjoint_from_train=True),
        splits.SplitSpec("test", 0.25, require_speaker_disjoint_from_train=True,
                         require_document_disjoint_from_train=True),
    ]


class TestMakeSplits:
    def test_four_docs_distinct_speakers_trivially_satisfiable(self):
        manifest = [row(f"u{k}", f"d{k}", f"s{k}", "M" if k % 2 else "F") for k in range(4)]
        out = splits.make_splits(manifest, specs_503025(), seed=1)
        assert set(out.assignment) == {f"d{k}" for k in range(4)}
        for s in out.report["splits"].values():
            assert all(s["constraints"].values())

    def test_single_shared_speaker_infeasible(self):
        manifest = [row(f"u{k}", f"d{k}", "only_speaker") for k in range(6)]
        with pytest.raises(InfeasibleError):
            splits.make_splits(manifest, specs_503025(), seed=0)

    def test_200_doc_synthetic_constraints_and_targets(self):
        manifest = synth.gen_manifest(n_docs=200, n_speakers=50, n_communities=25, seed=3)
        out = splits.make_splits(manifest, seed=17)
        rep = out.report
        # disjointness is exact
        train_speakers = {r.speaker_id for r in manifest if out.assignment[r.doc_id] == "train"}
        for name in ("dev-asr", "test"):
            spk = {r.speaker_id for r in manifest if out.assignment[r.doc_id] == name}
            assert not (spk & train_speakers)
        train_docs = {d for d, s in out.assignment.items() if s == "train"}
        for name in ("dev-mt", "test"):
            docs = {d for d, s in out.assignment.items() if s == name}
            assert not (docs & train_docs)
        for s in rep["splits"].values():
            assert all(s["constraints"].values())
            assert s["gender_l1_deviation"] <= 0.02
        total = rep["total_hours"]
        for name, s in rep["splits"].items():
            assert abs(s["hours"] - s["target_hours"]) <= 0.10 * s["target_hours"] + 1e-9, name

    def test_deterministic_under_seed(self):
        manifest = synth.gen_manifest(n_docs=60, n_speakers=20, n_communities=10, seed=5)
        a = splits.make_splits(manifest, seed=7)
        b = splits.make_splits(manifest, seed=7)
        assert a.assignment == b.assignment
        c = splits.make_splits(manifest, seed=8)
        assert c.assignment != a.assignment or c.report == b.report  # seeds may agree, usually differ

    def test_every_doc_assigned_once(self):
        manifest = synth.gen_manifest(n_docs=40, n_speakers=12, n_communities=6, seed=2)
        out = splits.make_splits(manifest, seed=3)
        assert out.report["every_doc_assigned_once"]
        docs = {r.doc_id for r in manifest}
        assert set(out.assignment) == docs

    def test_fractions_must_sum_to_one(self):
        manifest = [row("u0", "d0", "s0")]
        with pytest.raises(InfeasibleError):
            splits.make_splits(manifest, [splits.SplitSpec("train", 0.5)], seed=0)


class TestReport:
    def test_report_recomputable_from_assignment(self):
        manifest = synth.gen_manifest(n_docs=50, n_speakers=20, n_communities=10, seed=9)
        out = splits.make_splits(manifest, seed=11)
        again = splits.evaluate_assignment(manifest, splits.default_specs(), out.assignment)
        for name in out.report["splits"]:
            a, b = out.report["splits"][name], again["splits"][name]
            assert a["hours"] == pytest.approx(b["hours"])
            assert a["gender_l1_deviation"] == pytest.approx(b["gender_l1_deviation"])
            assert a["constraints"] == b["constraints"]

    def test_gender_u_excluded_from_distribution(self):
        manifest = [row("u0", "d0", "s0", "M"), row("u1", "d1", "s1", "F"),
                    row("u2", "d2", "s2", "U"), row("u3", "d3", "s3", "U")]
        rep = splits.evaluate_assignment(
            manifest, [splits.SplitSpec("train", 1.0)],
            {d: "train" for d in ("d0", "d1", "d2", "d3")})
        props = rep["splits"]["train"]["gender_proportions"]
        assert props["M"] == pytest.approx(0.5) and props["F"] == pytest.approx(0.5)

    def test_json_serialization(self):
        manifest = synth.gen_manifest(n_docs=20, n_speakers=10, n_communities=5, seed=1)
        out = splits.make_splits(manifest, seed=2)
        text = out.to_json()
        assert '"assignment"' in text and '"report"' in text
