import math

import numpy as np
import pytest

from longalign import quality
from longalign.core import AlignedSegment
from longalign.errors import EmptyRefError

from conftest import edit_distance_recursive


def seg(utt_id="u0", text="abc"):
    return AlignedSegment(utt_id=utt_id, doc_id="d", speaker_id="s", sent_ids=["s0"],
                          start_frame=0, end_frame=10, hop_ms=40, text_src=text, text_tgt="t")


class TestComputeStats:
    def test_identical(self):
        st = quality.compute_stats(list("ABC"), list("ABC"))
        assert st.cer == 0.0 and st.max_consecutive_errors == 0 and st.error_ratio == 0.0

    def test_one_substitution(self):
        st = quality.compute_stats(list("AXC"), list("ABC"))
        assert st.cer == pytest.approx(1 / 3)
        assert st.max_consecutive_errors == 1
        assert st.error_ratio == pytest.approx(1 / 3)

    def test_empty_ref_raises(self):
        with pytest.raises(EmptyRefError):
            quality.compute_stats(list("A"), [])

    def test_empty_hyp_infinite_ratio(self):
        st = quality.compute_stats([], list("AB"))
        assert st.cer == 1.0
        assert math.isinf(st.error_ratio)

    def test_cer_consistent_with_recursive_oracle(self):
        for seed in range(300):
            r = np.random.default_rng(seed)
            hyp = [int(x) for x in r.integers(0, 5, int(r.integers(0, 12)))]
            ref = [int(x) for x in r.integers(0, 5, int(r.integers(1, 12)))]
            st = quality.compute_stats(hyp, ref)
            assert st.cer == pytest.approx(edit_distance_recursive(hyp, ref) / len(ref))

    def test_error_ratio_uses_hyp_length(self):
        # 2 ref tokens missing: errors=2, hyp_len=1, ref_len=3
        st = quality.compute_stats(list("A"), list("ABC"))
        assert st.cer == pytest.approx(2 / 3)
        assert st.error_ratio == pytest.approx(2 / 1)

    def test_scale_consistency(self):
        a = quality.compute_stats(list("AXC"), list("ABC"))
        b = quality.compute_stats(list("AXCAXC"), list("ABCABC"))
        assert a.cer == pytest.approx(b.cer)


class TestPostFilter:
    def _stats(self, cer=0.0, consec=0, ratio=0.0):
        return quality.QualityStats(cer=cer, max_consecutive_errors=consec,
                                    error_ratio=ratio, ref_len=10, hyp_len=10)

    def test_infinite_thresholds_accept_all(self):
        t = quality.FilterThresholds(math.inf, 10**9, math.inf)
        items = [(seg(), self._stats(cer=5.0, consec=100, ratio=9.0))]
        accepted, rejected = quality.post_filter(items, t)
        assert len(accepted) == 1 and not rejected

    def test_cer_over_threshold_rejected(self):
        t = quality.FilterThresholds(max_cer=0.3, max_consec=10, max_error_ratio=10)
        accepted, rejected = quality.post_filter([(seg(), self._stats(cer=0.5))], t)
        assert not accepted and len(rejected) == 1

    def test_predicate_oracle_500(self, rng):
        t = quality.FilterThresholds(max_cer=0.3, max_consec=4, max_error_ratio=0.5)
        items = []
        for k in range(500):
            items.append((seg(utt_id=f"u{k}"),
                          self._stats(cer=float(rng.random()),
                                      consec=int(rng.integers(0, 10)),
                                      ratio=float(rng.random()))))
        accepted, rejected = quality.post_filter(items, t)
        assert len(accepted) + len(rejected) == 500
        for _, st in accepted:
            assert st.cer <= 0.3 and st.max_consecutive_errors <= 4 and st.error_ratio <= 0.5
        for _, st in rejected:
            assert st.cer > 0.3 or st.max_consecutive_errors > 4 or st.error_ratio > 0.5

    def test_monotone_in_each_threshold(self, rng):
        items = [(seg(utt_id=f"u{k}"),
                  self._stats(cer=float(rng.random()), consec=int(rng.integers(0, 8)),
                              ratio=float(rng.random()))) for k in range(200)]
        for dim in range(3):
            sizes = []
            for x in (0.1, 0.3, 0.6, 1.0):
                vals = [0.5, 4, 0.5]
                vals[dim] = x * (8 if dim == 1 else 1)
                t = quality.FilterThresholds(vals[0], int(vals[1]), vals[2])
                sizes.append(len(quality.post_filter(items, t)[0]))
            assert sizes == sorted(sizes)


class TestBinSample:
    def _items(self, cers):
        return [(seg(utt_id=f"u{k}"), quality.QualityStats(c, 0, 0.0, 5, 5))
                for k, c in enumerate(cers)]

    def test_three_bins_one_each(self):
        out = quality.bin_sample(self._items([0.05, 0.2, 0.9]), [0.1, 0.3], per_bin=5, seed=0)
        assert len(out) == 3
        assert {quality.cer_bin(st.cer, [0.1, 0.3]) for _, st in out} == {0, 1, 2}

    def test_small_bin_returned_whole(self):
        out = quality.bin_sample(self._items([0.05, 0.06]), [0.1], per_bin=10, seed=0)
        assert len(out) == 2

    def test_deterministic_under_seed(self, rng):
        items = self._items(list(rng.random(400)))
        a = quality.bin_sample(items, [0.2, 0.5, 0.8], per_bin=20, seed=9)
        b = quality.bin_sample(items, [0.2, 0.5, 0.8], per_bin=20, seed=9)
        assert [s.utt_id for s, _ in a] == [s.utt_id for s, _ in b]

    def test_bad_edges_rejected(self):
        with pytest.raises(ValueError):
            quality.bin_sample([], [0.3, 0.1], 5, 0)

    def test_boundary_cer_in_upper_bin(self):
        assert quality.cer_bin(0.1, [0.1, 0.3]) == 1
        assert quality.cer_bin(0.0999, [0.1, 0.3]) == 0


class TestLabelingSheet:
    def test_round_trip_and_report(self, tmp_path, rng):
        items = [(seg(utt_id=f"u{k}"), quality.QualityStats(float(rng.random()), 0, 0.0, 5, 5))
                 for k in range(60)]
        sample = quality.bin_sample(items, [0.3, 0.6], per_bin=10, seed=1)
        quality.write_labeling_sheet(sample, [0.3, 0.6], tmp_path / "sheet.jsonl")
        rows = quality.read_labeling_sheet(tmp_path / "sheet.jsonl")
        assert all(r["label"] is None for r in rows)
        for r in rows:
            r["label"] = r["cer"] < 0.45  # simulate manual annotation
        report = quality.threshold_report(rows, [0.2, 0.45, 0.9])
        assert report[0]["precision"] == 1.0
        assert report[1]["precision"] == 1.0
        assert report[2]["precision"] <= 1.0
        assert report[2]["n_accepted"] >= report[1]["n_accepted"]
