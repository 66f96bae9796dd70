"""Pipeline orchestration and command-line entry points.

Subcommands: prep-text, bitext-align, train-lm, first-pass, flex-align,
filter, split, synth, eval, validate, pipeline, topic-cuts. Stages consume
and produce files under a working directory, one subdirectory per document;
every stage writes a manifest of its outputs with content digests, and no
artifact contains wall-clock data, so reruns with identical inputs and seed
are byte-identical. Exit codes: 0 success, 2 configuration error, 3 stage
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import anchor as anchor_mod
from . import bitext as bitext_mod
from . import decode as decode_mod
from . import lm as lm_mod
from . import quality as quality_mod
from . import splits as splits_mod
from . import synth as synth_mod
from . import textproc
from .core import (
    BLANK_ID,
    PosteriorMatrix,
    UtteranceManifestRow,
    Vocab,
    read_embeddings,
    read_manifest,
    read_posteriors,
    write_manifest,
)
from .errors import ConfigError, LongAlignError, OrderError, StageError

log = logging.getLogger("longalign")

STAGES = ["prep-text", "bitext-align", "train-lm", "first-pass", "flex-align", "filter", "split"]


@dataclass
class CutList:
    """Media cut instructions for an external tool (16 kHz target)."""

    entries: list[tuple[str, float, float, str]]
    sample_rate: int = 16000

    def to_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for rec_id, start, end, label in self.entries:
                f.write(json.dumps({
                    "recording_id": rec_id, "start_s": start, "end_s": end,
                    "topic_label": label, "sample_rate": self.sample_rate,
                }, ensure_ascii=False) + "\n")


def topic_cuts(metadata: list[tuple[float, str]], recording_duration_s: float,
               recording_id: str = "rec") -> CutList:
    """Cut list from topic start timestamps; entry i spans [t_i, t_{i+1})."""
    times = [t for t, _ in metadata]
    if any(b < a for a, b in zip(times, times[1:])):
        raise OrderError("topic timestamps must be sorted ascending")
    if times and (times[0] < 0 or times[-1] >= recording_duration_s):
        raise OrderError("timestamps must lie within the recording")
    entries = []
    for k, (t, label) in enumerate(metadata):
        end = metadata[k + 1][0] if k + 1 < len(metadata) else recording_duration_s
        entries.append((recording_id, t, end, label))
    return CutList(entries)


def segment_by_blank_runs(post: PosteriorMatrix, min_run: int = 30) -> list[tuple[int, int]]:
    """Cut a posterior stream at runs of >= min_run blank-dominant frames.

    Intended for synthetic data only; real audio goes through an external
    VAD whose segment list is ingested instead.
    """
    blank_dom = np.argmax(post.logp, axis=1) == BLANK_ID
    bounds = []
    seg_start = 0
    t = 0
    T = post.frames
    while t < T:
        if blank_dom[t]:
            r = t
            while r < T and blank_dom[r]:
                r += 1
            # leading and trailing runs stay attached to their segment
            if r - t >= min_run and t > seg_start and r < T:
                mid = (t + r) // 2
                bounds.append((seg_start, mid))
                seg_start = mid
            t = r
        else:
            t += 1
    if seg_start < T:
        bounds.append((seg_start, T))
    return bounds


def read_segments(path) -> list[tuple[int, int]]:
    segs = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            d = json.loads(line)
            segs.append((int(d["start_frame"]), int(d["end_frame"])))
    return segs


# ---------------------------------------------------------------------------
# pipeline config and stage implementations
# ---------------------------------------------------------------------------

DEFAULT_CONFIG = {
    "seed": 17,
    "jobs": 1,
    "bitext": {"max_merge": 4, "window": 10, "base_size": 128,
               "penalty_ins": 0.8, "penalty_del": 0.8, "threshold": 0.627},
    "lm": {"order": 3, "bias_lambda": 0.7},
    "first_pass": {"beam": 12.0, "expand_tokens": 2,
                   "max_cer": 0.2, "max_consec": 4, "max_abs": 8, "min_len": 6},
    "flex": {"skip_weight": -8.0, "window_s": 60.0, "overlap_s": 20.0,
             "wildcard_penalty": -2.0},
    "filter": {"max_cer": 0.3, "max_consec": 6, "max_error_ratio": 0.5,
               "bin_edges": [0.05, 0.1, 0.2, 0.4], "per_bin": 60},
    "splits": [
        {"name": "train", "target_fraction": 0.8},
        {"name": "dev-asr", "target_fraction": 0.07, "require_speaker_disjoint_from_train": True},
        {"name": "dev-mt", "target_fraction": 0.08, "require_document_disjoint_from_train": True},
        {"name": "test", "target_fraction": 0.05,
         "require_speaker_disjoint_from_train": True, "require_document_disjoint_from_train": True},
    ],
}


def load_config(path_or_dict) -> dict:
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if path_or_dict is None:
        user = {}
    elif isinstance(path_or_dict, dict):
        user = path_or_dict
    else:
        try:
            user = json.loads(Path(path_or_dict).read_text(encoding="utf-8"))
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path_or_dict}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e
    for key, val in user.items():
        if isinstance(val, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(val)
        else:
            cfg[key] = val
    return cfg


class Workspace:
    """Input bundle directory plus the pipeline's output directory."""

    def __init__(self, bundle_dir, out_dir):
        self.bundle = Path(bundle_dir)
        self.out = Path(out_dir)
        if not self.bundle.is_dir():
            raise ConfigError(f"bundle directory not found: {self.bundle}")
        self.out.mkdir(parents=True, exist_ok=True)

    def docs(self) -> list[str]:
        return sorted(p.name for p in self.bundle.iterdir() if p.is_dir() and (p / "transcript.txt").exists())

    def doc_in(self, doc: str) -> Path:
        return self.bundle / doc

    def doc_out(self, doc: str) -> Path:
        p = self.out / doc
        p.mkdir(parents=True, exist_ok=True)
        return p

    def vocab(self) -> Vocab:
        docs = self.docs()
        if not docs:
            raise ConfigError(f"no document directories under {self.bundle}")
        return Vocab.from_file(self.doc_in(docs[0]) / "vocab.txt")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _write_stage_manifest(ws: Workspace, stage: str, params: dict, outputs: list[Path]) -> None:
    manifest = {
        "stage": stage,
        "params": params,
        "outputs": [
            {"path": str(p.relative_to(ws.out)), "sha256": _sha256(p)}
            for p in sorted(outputs)
        ],
    }
    (ws.out / f"manifest_{stage.replace('-', '_')}.json").write_text(
        json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise StageError(stage, f"missing required input: {path}")
    return path


def stage_prep_text(ws: Workspace, cfg: dict) -> list[Path]:
    outputs = []
    for doc in ws.docs():
        din, dout = ws.doc_in(doc), ws.doc_out(doc)
        src = textproc.doc_from_text(
            _require(din / "transcript.txt", "prep-text").read_text(encoding="utf-8"),
            doc, with_markers=True)
        tgt = textproc.doc_from_text(
            _require(din / "translation.txt", "prep-text").read_text(encoding="utf-8"),
            doc + "_tgt", with_markers=False)
        textproc.write_sentence_doc(src, dout / "sent_src.jsonl")
        textproc.write_sentence_doc(tgt, dout / "sent_tgt.jsonl")
        outputs += [dout / "sent_src.jsonl", dout / "sent_tgt.jsonl"]
    return outputs


def stage_bitext_align(ws: Workspace, cfg: dict) -> list[Path]:
    p = cfg["bitext"]
    params = bitext_mod.AlignParams(
        max_merge=int(p["max_merge"]), window=int(p["window"]), base_size=int(p["base_size"]),
        penalty_ins=float(p["penalty_ins"]), penalty_del=float(p["penalty_del"]),
        seed=int(cfg["seed"]),
    )
    outputs = []
    for doc in ws.docs():
        din, dout = ws.doc_in(doc), ws.doc_out(doc)
        src = bitext_mod.EmbeddingSet.from_file(_require(din / "src.lemb", "bitext-align"))
        tgt = bitext_mod.EmbeddingSet.from_file(_require(din / "tgt.lemb", "bitext-align"))
        pairs = bitext_mod.align_sentences(src, tgt, params)
        kept, dropped = bitext_mod.filter_alignments(pairs, float(p["threshold"]))
        for name, subset in (("pairs.jsonl", kept), ("pairs_dropped.jsonl", dropped)):
            with open(dout / name, "w", encoding="utf-8") as f:
                for pair in subset:
                    f.write(json.dumps(pair.to_dict()) + "\n")
            outputs.append(dout / name)
    return outputs


def stage_train_lm(ws: Workspace, cfg: dict) -> list[Path]:
    vocab = ws.vocab()
    order = int(cfg["lm"]["order"])
    lam = float(cfg["lm"]["bias_lambda"])
    all_sentences = []
    per_doc_sentences = {}
    for doc in ws.docs():
        sdoc = textproc.read_sentence_doc(ws.doc_out(doc) / "sent_src.jsonl", doc)
        seqs = [vocab.ids(s.tokens) for s in sdoc.sentences]
        per_doc_sentences[doc] = seqs
        all_sentences.extend(seqs)
    background = lm_mod.train_ngram(all_sentences, order, vocab)
    outputs = []
    for doc in ws.docs():
        doc_lm = lm_mod.train_ngram(per_doc_sentences[doc], order, vocab)
        biased = lm_mod.interpolate(doc_lm, background, lam, contexts="doc")
        out = ws.doc_out(doc) / "doc.arpa"
        lm_mod.write_arpa(biased, out)
        outputs.append(out)
    return outputs


def stage_first_pass(ws: Workspace, cfg: dict) -> list[Path]:
    vocab = ws.vocab()
    p = cfg["first_pass"]
    fp_cfg = anchor_mod.FirstPassConfig(
        order=int(cfg["lm"]["order"]),
        bias_lambda=float(cfg["lm"]["bias_lambda"]),
        beam=float(p["beam"]) if p["beam"] is not None else None,
        criteria=anchor_mod.AnchorCriteria(
            max_cer=float(p["max_cer"]), max_consec=int(p["max_consec"]),
            max_abs=int(p["max_abs"]), min_len=int(p["min_len"])),
        expand_tokens=int(p["expand_tokens"]),
    )
    outputs = []
    for doc in ws.docs():
        din, dout = ws.doc_in(doc), ws.doc_out(doc)
        segs = read_segments(_require(din / "segments.jsonl", "first-pass"))
        posts = [read_posteriors(din / f"seg_{i:03d}.lpost") for i in range(len(segs))]
        transcript = textproc.read_sentence_doc(dout / "sent_src.jsonl", doc)
        doc_lm = lm_mod.read_arpa(_require(dout / "doc.arpa", "first-pass"), vocab)
        regions, hyp_tokens, hyp_spans = anchor_mod.first_pass(
            posts, transcript, vocab, fp_cfg,
            segment_offsets=[s for s, _ in segs], lm=doc_lm, return_hyp=True)
        with open(dout / "regions.jsonl", "w", encoding="utf-8") as f:
            for r in regions:
                f.write(json.dumps({
                    "audio_start": r.audio_span[0], "audio_end": r.audio_span[1],
                    "ref_token_start": r.ref_token_span[0], "ref_token_end": r.ref_token_span[1],
                    "sent_start": r.ref_sentence_range[0], "sent_end": r.ref_sentence_range[1],
                }) + "\n")
        with open(dout / "hyp.jsonl", "w", encoding="utf-8") as f:
            for tok, (s, e) in zip(hyp_tokens, hyp_spans):
                f.write(json.dumps({"token_id": tok, "start_frame": s, "end_frame": e}) + "\n")
        outputs += [dout / "regions.jsonl", dout / "hyp.jsonl"]
    return outputs


def stage_flex_align(ws: Workspace, cfg: dict) -> list[Path]:
    vocab = ws.vocab()
    p = cfg["flex"]
    outputs = []
    for doc in ws.docs():
        din, dout = ws.doc_in(doc), ws.doc_out(doc)
        post = read_posteriors(_require(din / "audio.lpost", "flex-align"))
        transcript = textproc.read_sentence_doc(dout / "sent_src.jsonl", doc)
        sentences = [vocab.ids(s.tokens) for s in transcript.sentences]
        regions = []
        rpath = dout / "regions.jsonl"
        if rpath.exists():
            for line in rpath.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    d = json.loads(line)
                    regions.append(((d["audio_start"], d["audio_end"]),
                                    (d["sent_start"], d["sent_end"])))
        frames_per_s = 1000.0 / post.hop_ms
        window = decode_mod.WindowSpec(
            len_frames=max(2, int(float(p["window_s"]) * frames_per_s)),
            overlap_frames=int(float(p["overlap_s"]) * frames_per_s),
        )
        alignment = decode_mod.flex_align_window(
            post, sentences, float(p["skip_weight"]), window,
            candidate_range=regions or None,
            wildcard_penalty=float(p["wildcard_penalty"]),
            jobs=int(cfg.get("jobs", 1)),
        )
        with open(dout / "align.jsonl", "w", encoding="utf-8") as f:
            for sent, entry in zip(transcript.sentences, alignment.entries):
                row = {"sent_id": sent.sent_id, "status": entry.status}
                if entry.status == "aligned":
                    row["start_ms"] = entry.start_frame * post.hop_ms
                    row["end_ms"] = entry.end_frame * post.hop_ms
                    row["conf"] = round(entry.confidence, 6)
                f.write(json.dumps(row) + "\n")
        outputs.append(dout / "align.jsonl")
    return outputs


def _read_align(path, hop_ms):
    rows = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            d = json.loads(line)
            if d["status"] == "aligned":
                rows[d["sent_id"]] = (d["start_ms"] // hop_ms, d["end_ms"] // hop_ms, d.get("conf", 0.0))
    return rows


def stage_filter(ws: Workspace, cfg: dict) -> list[Path]:
    vocab = ws.vocab()
    p = cfg["filter"]
    thresholds = quality_mod.FilterThresholds(
        max_cer=float(p["max_cer"]), max_consec=int(p["max_consec"]),
        max_error_ratio=float(p["max_error_ratio"]))
    bin_edges = list(p["bin_edges"])
    outputs = []
    all_rows: list[UtteranceManifestRow] = []
    labeled_pool = []
    for doc in ws.docs():
        din, dout = ws.doc_in(doc), ws.doc_out(doc)
        post_header = read_posteriors(din / "audio.lpost")
        hop_ms = post_header.hop_ms
        transcript = textproc.read_sentence_doc(dout / "sent_src.jsonl", doc)
        translation = textproc.read_sentence_doc(dout / "sent_tgt.jsonl", doc)
        aligned = _read_align(_require(dout / "align.jsonl", "filter"), hop_ms)
        speakers = {}
        spk_file = din / "speakers.json"
        if spk_file.exists():
            speakers = json.loads(spk_file.read_text(encoding="utf-8"))

        hyp = []
        for line in _require(dout / "hyp.jsonl", "filter").read_text(encoding="utf-8").splitlines():
            if line.strip():
                d = json.loads(line)
                hyp.append((d["token_id"], d["start_frame"], d["end_frame"]))

        # per-sentence quality from decode tokens whose midpoint falls inside
        sent_stats: dict[str, quality_mod.QualityStats] = {}
        quality_rows = []
        for sent in transcript.sentences:
            entry = aligned.get(sent.sent_id)
            if entry is None:
                continue
            s, e, _conf = entry
            hyp_tokens = [tok for tok, hs, he in hyp if s <= (hs + he) / 2 < e]
            ref_tokens = vocab.ids(sent.tokens)
            stats = quality_mod.compute_stats(hyp_tokens, ref_tokens)
            sent_stats[sent.sent_id] = stats
            quality_rows.append({"sent_id": sent.sent_id, **stats.to_dict()})
        with open(dout / "quality.jsonl", "w", encoding="utf-8") as f:
            for row in quality_rows:
                f.write(json.dumps(row) + "\n")
        outputs.append(dout / "quality.jsonl")

        # assemble triplets from kept bitext pairs
        pairs = []
        for line in _require(dout / "pairs.jsonl", "filter").read_text(encoding="utf-8").splitlines():
            if line.strip():
                pairs.append(json.loads(line))
        segs, seg_stats = [], []
        for pair in pairs:
            if pair["src_len"] < 1 or pair["tgt_len"] < 1:
                continue
            src_sents = transcript.sentences[pair["src_start"]:pair["src_start"] + pair["src_len"]]
            tgt_sents = translation.sentences[pair["tgt_start"]:pair["tgt_start"] + pair["tgt_len"]]
            entries = [aligned.get(s.sent_id) for s in src_sents]
            stats = [sent_stats.get(s.sent_id) for s in src_sents]
            if any(e is None for e in entries) or any(st is None for st in stats):
                continue
            start = min(e[0] for e in entries)
            end = max(e[1] for e in entries)
            worst = max(stats, key=lambda st: st.cer)
            speaker = transcript.speaker_of(src_sents[0])
            seg = type("Seg", (), {})()
            seg.utt_id = f"{doc}_{src_sents[0].sent_id}"
            seg.doc_id = doc
            seg.speaker_id = speaker
            seg.gender = speakers.get(speaker, "U")
            seg.sent_ids = [s.sent_id for s in src_sents]
            seg.start_frame, seg.end_frame, seg.hop_ms = int(start), int(end), hop_ms
            seg.text_src = "".join(s.text.strip() for s in src_sents)
            seg.text_tgt = " ".join(s.text.strip() for s in tgt_sents)
            seg.pair = pair
            segs.append((seg, worst))
        accepted, rejected = quality_mod.post_filter(segs, thresholds)
        triplet_path = dout / "triplets.jsonl"
        rows = []
        for seg, stats in accepted:
            rows.append(UtteranceManifestRow(
                utt_id=seg.utt_id, doc_id=seg.doc_id, speaker_id=seg.speaker_id,
                gender=seg.gender,
                duration_s=(seg.end_frame - seg.start_frame) * seg.hop_ms / 1000.0,
                start_s=seg.start_frame * seg.hop_ms / 1000.0,
                end_s=seg.end_frame * seg.hop_ms / 1000.0,
                text_src=seg.text_src, text_tgt=seg.text_tgt,
                quality=stats.to_dict(),
            ))
        write_manifest(rows, triplet_path)
        outputs.append(triplet_path)
        all_rows.extend(rows)
        labeled_pool.extend(accepted)
        labeled_pool.extend(rejected)

    write_manifest(all_rows, ws.out / "manifest.jsonl")
    outputs.append(ws.out / "manifest.jsonl")
    sheet = quality_mod.bin_sample(labeled_pool, bin_edges, int(p["per_bin"]), int(cfg["seed"]))
    quality_mod.write_labeling_sheet(sheet, bin_edges, ws.out / "labeling_sheet.jsonl")
    outputs.append(ws.out / "labeling_sheet.jsonl")
    return outputs


def stage_split(ws: Workspace, cfg: dict) -> list[Path]:
    manifest = read_manifest(_require(ws.out / "manifest.jsonl", "split"))
    if not manifest:
        raise StageError("split", "manifest is empty")
    specs = [splits_mod.SplitSpec.from_dict(d) for d in cfg["splits"]]
    assignment = splits_mod.make_splits(manifest, specs, int(cfg["seed"]))

    # per-split perplexity under a 3-gram model trained on the train split
    vocab = ws.vocab()
    by_split: dict[str, list[list[int]]] = {s.name: [] for s in specs}
    for row in manifest:
        by_split[assignment.assignment[row.doc_id]].append(vocab.ids(textproc.tokenize(row.text_src)))
    ppl = {}
    if by_split.get("train"):
        train_lm = lm_mod.train_ngram(by_split["train"], int(cfg["lm"]["order"]), vocab)
        for name, seqs in by_split.items():
            toks = [t for seq in seqs for t in seq]
            ppl[name] = lm_mod.perplexity(train_lm, toks) if toks else None
    assignment.report["split_perplexity"] = ppl

    out = ws.out / "assignment.json"
    out.write_text(assignment.to_json() + "\n", encoding="utf-8")
    return [out]


STAGE_FUNCS = {
    "prep-text": stage_prep_text,
    "bitext-align": stage_bitext_align,
    "train-lm": stage_train_lm,
    "first-pass": stage_first_pass,
    "flex-align": stage_flex_align,
    "filter": stage_filter,
    "split": stage_split,
}


def run_pipeline(config: dict, bundle_dir, out_dir, stages: list[str] | None = None) -> dict:
    """Execute pipeline stages in order; abort on the first failing stage."""
    ws = Workspace(bundle_dir, out_dir)
    lock = ws.out / ".lock"
    if lock.exists():
        raise StageError("pipeline", f"output directory is locked by {lock.read_text().strip()}")
    lock.write_text(str(os.getpid()))
    report = {"stages": [], "ok": True}
    try:
        for stage in stages or STAGES:
            func = STAGE_FUNCS[stage]
            log.info("stage %s ...", stage)
            try:
                outputs = func(ws, config)
            except LongAlignError as e:
                report["stages"].append({"stage": stage, "ok": False, "error": str(e)})
                report["ok"] = False
                report["failed_stage"] = stage
                raise StageError(stage, str(e)) from e
            _write_stage_manifest(ws, stage, config, outputs)
            report["stages"].append({"stage": stage, "ok": True, "n_outputs": len(outputs)})
    finally:
        lock.unlink(missing_ok=True)
        (ws.out / "pipeline_report.json").write_text(
            json.dumps(report, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return report


# ---------------------------------------------------------------------------
# validation and evaluation
# ---------------------------------------------------------------------------


def validate_posteriors_file(path) -> list[str]:
    problems = []
    try:
        read_posteriors(path)
    except LongAlignError as e:
        problems.append(f"{path}: {e}")
    return problems


def validate_embeddings_file(path) -> list[str]:
    problems = []
    try:
        rows, index = read_embeddings(path)
        norms = np.linalg.norm(rows.astype(np.float64), axis=1)
        bad = np.nonzero(np.abs(norms - 1.0) > 1e-4)[0]
        for b in bad[:5]:
            problems.append(f"{path}: row {b} not L2-normalized (|v|={norms[b]:.6f})")
        if index:
            singles = {e["merge_start"] for e in index if e["merge_len"] == 1}
            n = max(singles) + 1 if singles else 0
            missing = set(range(n)) - singles
            if missing:
                problems.append(f"{path}: missing single rows for sentences {sorted(missing)[:5]}")
            if len(index) != rows.shape[0]:
                problems.append(f"{path}: sidecar has {len(index)} entries for {rows.shape[0]} rows")
    except LongAlignError as e:
        problems.append(f"{path}: {e}")
    return problems


def validate_pipeline_output(out_dir) -> list[str]:
    """Cross-check every triplet against its pair, span, and quality stats."""
    out = Path(out_dir)
    problems = []
    manifest = read_manifest(out / "manifest.jsonl")
    for doc_dir in sorted(p for p in out.iterdir() if p.is_dir()):
        doc = doc_dir.name
        apath = doc_dir / "align.jsonl"
        if not apath.exists():
            continue
        aligned = set()
        for line in apath.read_text(encoding="utf-8").splitlines():
            if line.strip():
                d = json.loads(line)
                if d["status"] == "aligned":
                    aligned.add(d["sent_id"])
        pair_starts = set()
        for line in (doc_dir / "pairs.jsonl").read_text(encoding="utf-8").splitlines():
            if line.strip():
                d = json.loads(line)
                pair_starts.add((d["src_start"], d["src_len"]))
        sents = [json.loads(l)["sent_id"] for l in (doc_dir / "sent_src.jsonl").read_text(encoding="utf-8").splitlines() if l.strip()]
        sent_pos = {sid: k for k, sid in enumerate(sents)}
        for row in manifest:
            if row.doc_id != doc:
                continue
            sid = row.utt_id[len(doc) + 1:]
            if sid not in aligned:
                problems.append(f"{row.utt_id}: triplet not backed by an aligned span")
            if row.quality is None:
                problems.append(f"{row.utt_id}: triplet lacks quality stats")
            pos = sent_pos.get(sid)
            if pos is None or not any(s <= pos < s + ln for s, ln in pair_starts):
                problems.append(f"{row.utt_id}: triplet not covered by a kept bitext pair")
    return problems


def cmd_eval(args) -> int:
    ws_out = Path(args.out_dir)
    bundle = Path(args.bundle_dir)
    k = args.k_frames
    per_doc = {}
    exact = 0
    total_spoken = 0
    skipped_spoken = 0
    for doc_dir in sorted(p for p in bundle.iterdir() if p.is_dir()):
        doc = doc_dir.name
        gold_path = doc_dir / "gold.json"
        apath = ws_out / doc / "align.jsonl"
        if not gold_path.exists() or not apath.exists():
            continue
        meta, gold = synth_mod.read_gold(doc_dir)
        hop = meta["hop_ms"]
        entries = []
        for line in apath.read_text(encoding="utf-8").splitlines():
            if line.strip():
                d = json.loads(line)
                if d["status"] == "aligned":
                    entries.append(decode_mod.SentenceAlignment(
                        "aligned", d["start_ms"] // hop, d["end_ms"] // hop, d.get("conf", 0.0)))
                else:
                    entries.append(decode_mod.SentenceAlignment("skipped"))
        pred = decode_mod.FlexAlignment(entries)
        metrics = synth_mod.score_alignment(pred, gold, k_frames=k)
        for entry, g in zip(entries, gold):
            if g.spoken:
                total_spoken += 1
                if entry.status == "skipped":
                    skipped_spoken += 1
                elif entry.start_frame == g.start_frame and entry.end_frame == g.end_frame:
                    exact += 1
        per_doc[doc] = metrics
    agg = {
        "per_doc": per_doc,
        "exact_span_fraction": exact / total_spoken if total_spoken else 0.0,
        "spoken_skipped": skipped_spoken,
        "n_spoken": total_spoken,
    }
    out = json.dumps(agg, indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(out + "\n", encoding="utf-8")
    else:
        print(out)
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override config seed")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="parallel workers where supported")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    ap = argparse.ArgumentParser(prog="longalign",
                                 description="sentence-level alignment toolkit for long audio")
    ap.add_argument("--seed", type=int, default=None, help="override config seed")
    ap.add_argument("--jobs", type=int, default=None, help="parallel workers where supported")
    ap.add_argument("-v", "--verbose", action="store_true", default=False)
    subparsers = ap.add_subparsers(dest="command", required=True)

    class _Sub:
        def add_parser(self, name, **kw):
            return subparsers.add_parser(name, parents=[common], **kw)

    sub = _Sub()

    p = sub.add_parser("prep-text", help="speaker turns + sentence split + tokenize")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--doc-id", default="doc")
    p.add_argument("--no-markers", action="store_true")
    p.add_argument("--lexicon", default=None, help="optional romanization TSV")

    p = sub.add_parser("bitext-align", help="align source/target sentence embeddings")
    p.add_argument("--src-emb", required=True)
    p.add_argument("--tgt-emb", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=bitext_mod.DEFAULT_SCORE_THRESHOLD)
    p.add_argument("--max-merge", type=int, default=4)
    p.add_argument("--window", type=int, default=10)

    p = sub.add_parser("train-lm", help="train a Witten-Bell n-gram model")
    p.add_argument("--in", dest="infile", required=True, help="tokenized text, one sentence per line")
    p.add_argument("--vocab", required=True)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--background", default=None, help="optional background text for biasing")
    p.add_argument("--bias-lambda", type=float, default=0.7)
    p.add_argument("--out", required=True)

    p = sub.add_parser("first-pass", help="anchor-based paragraph alignment")
    p.add_argument("--posts", nargs="+", required=True)
    p.add_argument("--doc", required=True, help="sentence JSONL from prep-text")
    p.add_argument("--vocab", required=True)
    p.add_argument("--offsets", type=int, nargs="*", default=None)
    p.add_argument("--beam", type=float, default=12.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("flex-align", help="sliding-window flexible alignment")
    p.add_argument("--post", required=True)
    p.add_argument("--sents", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--regions", default=None)
    p.add_argument("--skip-weight", type=float, default=-8.0)
    p.add_argument("--window-s", type=float, default=60.0)
    p.add_argument("--overlap-s", type=float, default=20.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("filter", help="quality filter or labeling-sheet precision report")
    p.add_argument("--labels", default=None, help="labeled sheet for a precision report")
    p.add_argument("--thresholds", type=float, nargs="*", default=[0.05, 0.1, 0.2, 0.3, 0.5])
    p.add_argument("--out", default=None)

    p = sub.add_parser("split", help="constraint-driven corpus splits")
    p.add_argument("--manifest", required=True)
    p.add_argument("--spec", default=None, help="JSON list of split specs")
    p.add_argument("--out", required=True)

    p = sub.add_parser("synth", help="generate a synthetic gold-aligned corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--docs", type=int, default=2)
    p.add_argument("--sentences", type=int, default=50)
    p.add_argument("--speakers", type=int, default=4)
    p.add_argument("--vocab-size", type=int, default=60)
    p.add_argument("--p-sub", type=float, default=0.0)
    p.add_argument("--p-reorder", type=float, default=0.0)
    p.add_argument("--p-unspoken", type=float, default=0.0)
    p.add_argument("--p-acoustic", type=float, default=0.0)

    p = sub.add_parser("eval", help="score pipeline output against bundle gold labels")
    p.add_argument("--bundle-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--k-frames", type=int, default=5)
    p.add_argument("--out", default=None)

    p = sub.add_parser("validate", help="validate file formats and pipeline cross-references")
    p.add_argument("--post", nargs="*", default=[])
    p.add_argument("--emb", nargs="*", default=[])
    p.add_argument("--manifest", nargs="*", default=[])
    p.add_argument("--pipeline-out", default=None)

    p = sub.add_parser("pipeline", help="run all stages over a bundle directory")
    p.add_argument("--bundle-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--stages", nargs="*", default=None)

    p = sub.add_parser("topic-cuts", help="cut list from topic timestamps")
    p.add_argument("--meta", required=True, help="JSONL of {timestamp_s, label}")
    p.add_argument("--duration-s", type=float, required=True)
    p.add_argument("--recording-id", default="rec")
    p.add_argument("--out", required=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return _dispatch(args)
    except (ConfigError, OrderError) as e:
        log.error("%s", e)
        return 2
    except LongAlignError as e:
        log.error("%s", e)
        return 3


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "prep-text":
        text = Path(args.infile).read_text(encoding="utf-8")
        doc = textproc.doc_from_text(text, args.doc_id, with_markers=not args.no_markers)
        if args.lexicon:
            lex = textproc.PronLexicon.from_file(args.lexicon)
            for s in doc.sentences:
                s.tokens, _ = textproc.romanize(s.tokens, lex)
        textproc.write_sentence_doc(doc, args.out)
        return 0

    if cmd == "bitext-align":
        src = bitext_mod.EmbeddingSet.from_file(args.src_emb)
        tgt = bitext_mod.EmbeddingSet.from_file(args.tgt_emb)
        params = bitext_mod.AlignParams(max_merge=args.max_merge, window=args.window,
                                        seed=args.seed or 0)
        pairs = bitext_mod.align_sentences(src, tgt, params)
        kept, dropped = bitext_mod.filter_alignments(pairs, args.threshold)
        with open(args.out, "w", encoding="utf-8") as f:
            for pair in kept:
                f.write(json.dumps(pair.to_dict()) + "\n")
        log.info("kept %d pairs, dropped %d", len(kept), len(dropped))
        return 0

    if cmd == "train-lm":
        vocab = Vocab.from_file(args.vocab)
        seqs = [vocab.ids(textproc.tokenize(line))
                for line in Path(args.infile).read_text(encoding="utf-8").splitlines() if line.strip()]
        model = lm_mod.train_ngram(seqs, args.order, vocab)
        if args.background:
            bg_seqs = [vocab.ids(textproc.tokenize(line))
                       for line in Path(args.background).read_text(encoding="utf-8").splitlines() if line.strip()]
            bg = lm_mod.train_ngram(bg_seqs, args.order, vocab)
            model = lm_mod.interpolate(model, bg, args.bias_lambda)
        lm_mod.write_arpa(model, args.out)
        return 0

    if cmd == "first-pass":
        vocab = Vocab.from_file(args.vocab)
        posts = [read_posteriors(p) for p in args.posts]
        transcript = textproc.read_sentence_doc(args.doc)
        cfg = anchor_mod.FirstPassConfig(beam=args.beam)
        regions = anchor_mod.first_pass(posts, transcript, vocab, cfg, segment_offsets=args.offsets)
        with open(args.out, "w", encoding="utf-8") as f:
            for r in regions:
                f.write(json.dumps({
                    "audio_start": r.audio_span[0], "audio_end": r.audio_span[1],
                    "ref_token_start": r.ref_token_span[0], "ref_token_end": r.ref_token_span[1],
                    "sent_start": r.ref_sentence_range[0], "sent_end": r.ref_sentence_range[1]}) + "\n")
        return 0

    if cmd == "flex-align":
        vocab = Vocab.from_file(args.vocab)
        post = read_posteriors(args.post)
        transcript = textproc.read_sentence_doc(args.sents)
        sentences = [vocab.ids(s.tokens) for s in transcript.sentences]
        regions = None
        if args.regions:
            regions = []
            for line in Path(args.regions).read_text(encoding="utf-8").splitlines():
                if line.strip():
                    d = json.loads(line)
                    regions.append(((d["audio_start"], d["audio_end"]), (d["sent_start"], d["sent_end"])))
        frames_per_s = 1000.0 / post.hop_ms
        window = decode_mod.WindowSpec(max(2, int(args.window_s * frames_per_s)),
                                       int(args.overlap_s * frames_per_s))
        alignment = decode_mod.flex_align_window(post, sentences, args.skip_weight, window,
                                                 candidate_range=regions, jobs=args.jobs or 1)
        with open(args.out, "w", encoding="utf-8") as f:
            for sent, entry in zip(transcript.sentences, alignment.entries):
                row = {"sent_id": sent.sent_id, "status": entry.status}
                if entry.status == "aligned":
                    row["start_ms"] = entry.start_frame * post.hop_ms
                    row["end_ms"] = entry.end_frame * post.hop_ms
                    row["conf"] = round(entry.confidence, 6)
                f.write(json.dumps(row) + "\n")
        return 0

    if cmd == "filter":
        if not args.labels:
            raise ConfigError("standalone filter needs --labels (pipeline runs the filter stage)")
        rows = quality_mod.read_labeling_sheet(args.labels)
        report = quality_mod.threshold_report(rows, args.thresholds)
        out = json.dumps(report, indent=1)
        if args.out:
            Path(args.out).write_text(out + "\n", encoding="utf-8")
        else:
            print(out)
        return 0

    if cmd == "split":
        manifest = read_manifest(args.manifest)
        specs = None
        if args.spec:
            specs = [splits_mod.SplitSpec.from_dict(d)
                     for d in json.loads(Path(args.spec).read_text(encoding="utf-8"))]
        assignment = splits_mod.make_splits(manifest, specs, args.seed or 0)
        Path(args.out).write_text(assignment.to_json() + "\n", encoding="utf-8")
        return 0

    if cmd == "synth":
        params = synth_mod.NoiseParams(p_sub=args.p_sub, p_reorder=args.p_reorder,
                                       p_unspoken=args.p_unspoken, p_acoustic=args.p_acoustic)
        size = synth_mod.SynthSize(n_speakers=args.speakers, n_sentences=args.sentences,
                                   vocab_size=args.vocab_size)
        seed = args.seed if args.seed is not None else 7
        for d in range(args.docs):
            bundle = synth_mod.gen_meeting(params, size, seed, doc_index=d)
            synth_mod.write_bundle(bundle, args.out_dir)
        log.info("wrote %d docs under %s", args.docs, args.out_dir)
        return 0

    if cmd == "eval":
        return cmd_eval(args)

    if cmd == "validate":
        problems = []
        for p in args.post:
            problems += validate_posteriors_file(p)
        for p in args.emb:
            problems += validate_embeddings_file(p)
        for p in args.manifest:
            try:
                read_manifest(p)
            except LongAlignError as e:
                problems.append(f"{p}: {e}")
        if args.pipeline_out:
            problems += validate_pipeline_output(args.pipeline_out)
        for problem in problems:
            print(f"WARNING: {problem}")
        if problems:
            return 3
        print("OK")
        return 0

    if cmd == "pipeline":
        config = load_config(args.config)
        if args.seed is not None:
            config["seed"] = args.seed
        if args.jobs is not None:
            config["jobs"] = args.jobs
        report = run_pipeline(config, args.bundle_dir, args.out_dir, args.stages)
        return 0 if report["ok"] else 3

    if cmd == "topic-cuts":
        meta = []
        for line in Path(args.meta).read_text(encoding="utf-8").splitlines():
            if line.strip():
                d = json.loads(line)
                meta.append((float(d["timestamp_s"]), d.get("label", "")))
        cuts = topic_cuts(meta, args.duration_s, args.recording_id)
        cuts.to_jsonl(args.out)
        return 0

    raise ConfigError(f"unknown command {cmd}")


if __name__ == "__main__":
    sys.exit(main())
