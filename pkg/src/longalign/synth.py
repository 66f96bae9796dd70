"""Synthetic meeting generator with known gold alignments.

Bundles contain everything the pipeline ingests (speaker-marked transcript,
pseudo-translation, frame posteriors, segment list, sentence embeddings,
vocabulary) plus the gold labels the pipeline is judged against. In this
synthetic world every transcript character is spoken, terminators included;
all transcript/speech divergence comes from the noise model: lexical
substitutions, local reorders (the written form reorders what was said),
inserted unspoken sentences, and emission corruption.

Sentence tokens are sequential CJK codepoints so the text round-trips
through the character tokenizer exactly; the pseudo-translation maps token
ids into a disjoint Latin vocabulary and reuses the source sentence's
embedding vector, giving bitext alignment a checkable diagonal structure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    BLANK,
    BLANK_ID,
    UNK,
    PosteriorMatrix,
    UtteranceManifestRow,
    Vocab,
    write_embeddings,
    write_posteriors,
)
from .decode import FlexAlignment
from .errors import UniverseMismatchError

CJK_BASE = 0x4E00
TERMINATORS = "。！？"


@dataclass
class NoiseParams:
    p_sub: float = 0.0
    p_reorder: float = 0.0
    p_unspoken: float = 0.0
    p_acoustic: float = 0.0
    dur_range: tuple[int, int] = (2, 5)

    def __post_init__(self):
        for name in ("p_sub", "p_reorder", "p_unspoken", "p_acoustic"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.dur_range[0] < 1 or self.dur_range[1] < self.dur_range[0]:
            raise ValueError("dur_range must be (lo, hi) with lo >= 1")


@dataclass
class SynthSize:
    n_speakers: int = 4
    n_sentences: int = 50
    vocab_size: int = 60

    def __post_init__(self):
        if min(self.n_speakers, self.n_sentences, self.vocab_size) < 1:
            raise ValueError("sizes must be >= 1")


@dataclass
class GoldSentence:
    """Gold record for one transcript sentence."""

    spoken: bool
    start_frame: int = -1
    end_frame: int = -1
    spoken_tokens: list[str] = field(default_factory=list)
    provenance: list[dict] = field(default_factory=list)


@dataclass
class SynthBundle:
    doc_id: str
    vocab: Vocab
    hop_ms: int
    transcript_text: str
    translation_text: str
    transcript_sentences: list[list[str]]  # token lists, transcript form
    gold: list[GoldSentence]
    posteriors: PosteriorMatrix
    segments: list[tuple[int, int]]
    src_vectors: np.ndarray
    tgt_vectors: np.ndarray
    speakers: dict[str, str]  # speaker id -> gender
    sentence_speaker: list[str]


def _sentence_tokens(rng, content_tokens, trans, length) -> list[str]:
    """Sample one sentence from the order-2 generator model."""
    toks = [content_tokens[rng.integers(0, len(content_tokens))]]
    for _ in range(length - 1):
        prev = toks[-1]
        toks.append(content_tokens[trans[prev][rng.integers(0, trans[prev].shape[0])]])
    toks.append(TERMINATORS[int(rng.integers(0, len(TERMINATORS)))])
    return toks


def _apply_noise(tokens: list[str], params: NoiseParams, rng, content_tokens) -> tuple[list[str], list[dict]]:
    """Transcript-side edits with provenance; terminator left untouched."""
    out = list(tokens)
    prov: list[dict] = []
    body = len(out) - 1  # exclude terminator
    for i in range(body):
        if params.p_sub > 0 and rng.random() < params.p_sub:
            new = content_tokens[int(rng.integers(0, len(content_tokens)))]
            if new != out[i]:
                prov.append({"kind": "sub", "pos": i, "old": out[i], "new": new})
                out[i] = new
    i = 0
    while i < body - 1:
        if params.p_reorder > 0 and rng.random() < params.p_reorder:
            k = int(rng.integers(2, min(3, body - i) + 1))  # swap window <= 3
            seg = out[i:i + k]
            rotated = seg[1:] + seg[:1]
            if rotated != seg:
                prov.append({"kind": "reorder", "pos": i, "len": k})
                out[i:i + k] = rotated
            i += k
        else:
            i += 1
    return out, prov


def undo_provenance(transcript_tokens: Sequence[str], provenance: Sequence[dict]) -> list[str]:
    """Invert transcript edits; reconstructs the spoken form exactly."""
    out = list(transcript_tokens)
    for tag in reversed(provenance):
        if tag["kind"] == "sub":
            out[tag["pos"]] = tag["old"]
        elif tag["kind"] == "reorder":
            i, k = tag["pos"], tag["len"]
            seg = out[i:i + k]
            out[i:i + k] = seg[-1:] + seg[:-1]
    return out


def translate_tokens(tokens: Sequence[str], vocab: Vocab, rng=None, p_reorder: float = 0.0) -> list[str]:
    """Deterministic token-wise mapping into a disjoint Latin vocabulary."""
    out = [f"w{vocab.id(t):03d}" for t in tokens if t not in TERMINATORS]
    if rng is not None and p_reorder > 0:
        i = 0
        while i < len(out) - 1:
            if rng.random() < p_reorder:
                out[i], out[i + 1] = out[i + 1], out[i]
                i += 2
            else:
                i += 1
    return out


def _sentence_vector(doc_seed: Sequence[int], sent_idx: int, dim: int) -> np.ndarray:
    rng = np.random.default_rng(list(doc_seed) + [971, sent_idx])
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


def gen_meeting(
    params: NoiseParams,
    size: SynthSize,
    seed: int,
    doc_index: int = 0,
    hop_ms: int = 40,
    sentence_len: tuple[int, int] = (4, 9),
    turn_sentences: tuple[int, int] = (2, 6),
    seg_sentences: int = 25,
    sentence_gap: tuple[int, int] = (2, 6),
    segment_gap: int = 12,
    emb_dim: int = 32,
) -> SynthBundle:
    """Generate one meeting with gold alignments; deterministic given seed.

    Spoken sentences come from a seeded order-2 generator model; the
    transcript applies the noise model with exact provenance; posteriors
    put ``1 - p_acoustic`` on the gold token per frame (rest uniform) with
    blank frames between tokens and larger blank gaps between sentences and
    segments.
    """
    doc_seed = [seed, doc_index]
    rng = np.random.default_rng(doc_seed)
    doc_id = f"doc_{doc_index:03d}"

    content = [chr(CJK_BASE + i) for i in range(size.vocab_size)]
    vocab = Vocab([BLANK, UNK] + content + list(TERMINATORS))
    # order-2 generator model: each token allows a seeded subset of followers
    fanout = max(2, size.vocab_size // 4)
    trans = {t: rng.integers(0, size.vocab_size, fanout) for t in content}

    speakers = {f"spk_{doc_index:03d}_{k}": ("M" if k % 2 == 0 else "F") for k in range(size.n_speakers)}
    speaker_ids = list(speakers)

    spoken: list[list[str]] = []
    for _ in range(size.n_sentences):
        length = int(rng.integers(sentence_len[0], sentence_len[1] + 1))
        spoken.append(_sentence_tokens(rng, content, trans, length))

    # transcript = noisy copy of each spoken sentence + inserted unspoken ones
    transcript_sentences: list[list[str]] = []
    gold: list[GoldSentence] = []
    spoken_of: list[int | None] = []
    for si, toks in enumerate(spoken):
        noisy, prov = _apply_noise(toks, params, rng, content)
        transcript_sentences.append(noisy)
        gold.append(GoldSentence(True, spoken_tokens=list(toks), provenance=prov))
        spoken_of.append(si)
        if params.p_unspoken > 0 and rng.random() < params.p_unspoken:
            length = int(rng.integers(sentence_len[0], sentence_len[1] + 1))
            extra = _sentence_tokens(rng, content, trans, length)
            transcript_sentences.append(extra)
            gold.append(GoldSentence(False))
            spoken_of.append(None)

    # speaker turns over transcript sentences
    sentence_speaker: list[str] = []
    turn_lines: list[str] = []
    k = 0
    while k < len(transcript_sentences):
        n_in_turn = int(rng.integers(turn_sentences[0], turn_sentences[1] + 1))
        spk = speaker_ids[int(rng.integers(0, len(speaker_ids)))]
        chunk = transcript_sentences[k:k + n_in_turn]
        sentence_speaker.extend([spk] * len(chunk))
        turn_lines.append(f"{spk}: " + "".join("".join(s) for s in chunk))
        k += n_in_turn
    transcript_text = "\n".join(turn_lines) + "\n"

    # emission stream for spoken sentences, with gold frame spans
    vsize = len(vocab)
    rows: list[np.ndarray] = []
    frame = 0
    seg_bounds: list[tuple[int, int]] = []
    seg_start = 0
    spoken_seen = 0

    def emit(token_id: int, n: int):
        nonlocal frame
        if params.p_acoustic == 0.0:
            row = np.full(vsize, -np.inf, dtype=np.float64)
            row[token_id] = 0.0
        else:
            row = np.full(vsize, np.log(params.p_acoustic / (vsize - 1)), dtype=np.float64)
            row[token_id] = np.log1p(-params.p_acoustic)
        rows.extend([row] * n)
        frame += n

    total_spoken = sum(1 for g in gold if g.spoken)
    emit(BLANK_ID, int(rng.integers(sentence_gap[0], sentence_gap[1] + 1)))
    for gi, g in enumerate(gold):
        if not g.spoken:
            continue
        toks = g.spoken_tokens
        g.start_frame = frame
        for ti, tok in enumerate(toks):
            if ti > 0:
                emit(BLANK_ID, 1)
            dur = int(rng.integers(params.dur_range[0], params.dur_range[1] + 1))
            emit(vocab.id(tok), dur)
        g.end_frame = frame
        spoken_seen += 1
        if spoken_seen == total_spoken:
            break
        if spoken_seen % seg_sentences == 0:
            emit(BLANK_ID, segment_gap)
            seg_bounds.append((seg_start, frame))
            seg_start = frame
        else:
            emit(BLANK_ID, int(rng.integers(sentence_gap[0], sentence_gap[1] + 1)))
    if seg_start < frame:
        seg_bounds.append((seg_start, frame))

    posteriors = PosteriorMatrix(hop_ms, np.stack(rows).astype(np.float32), validate=False)

    # pseudo-translation (one target sentence per transcript sentence)
    tgt_lines = []
    for toks in transcript_sentences:
        mapped = translate_tokens(toks, vocab, rng, params.p_reorder)
        tgt_lines.append(" ".join(mapped) + ".")
    translation_text = "\n".join(tgt_lines) + "\n"

    n_sents = len(transcript_sentences)
    src_vectors = np.stack([_sentence_vector(doc_seed, i, emb_dim) for i in range(n_sents)])
    tgt_vectors = src_vectors.copy()

    return SynthBundle(
        doc_id=doc_id,
        vocab=vocab,
        hop_ms=hop_ms,
        transcript_text=transcript_text,
        translation_text=translation_text,
        transcript_sentences=transcript_sentences,
        gold=gold,
        posteriors=posteriors,
        segments=seg_bounds,
        src_vectors=src_vectors,
        tgt_vectors=tgt_vectors,
        speakers=speakers,
        sentence_speaker=sentence_speaker,
    )


def score_alignment(pred: FlexAlignment, gold: Sequence[GoldSentence], k_frames: int = 5) -> dict:
    """Boundary accuracy and skip precision/recall against gold labels.

    Boundary accuracy is computed over sentences that are gold-spoken and
    predicted-aligned (0.0 when that set is empty); vacuous skip precision
    and recall are 1.0.
    """
    if len(pred.entries) != len(gold):
        raise UniverseMismatchError(
            f"prediction covers {len(pred.entries)} sentences, gold {len(gold)}"
        )
    evaluable = 0
    within = 0
    pred_skipped = set()
    gold_unspoken = {i for i, g in enumerate(gold) if not g.spoken}
    for i, (entry, g) in enumerate(zip(pred.entries, gold)):
        if entry.status == "skipped":
            pred_skipped.add(i)
        elif g.spoken:
            evaluable += 1
            if abs(entry.start_frame - g.start_frame) <= k_frames and abs(entry.end_frame - g.end_frame) <= k_frames:
                within += 1
    hit = len(pred_skipped & gold_unspoken)
    return {
        "boundary_accuracy": within / evaluable if evaluable else 0.0,
        "skip_precision": hit / len(pred_skipped) if pred_skipped else 1.0,
        "skip_recall": hit / len(gold_unspoken) if gold_unspoken else 1.0,
        "n_evaluable": evaluable,
        "n_pred_skipped": len(pred_skipped),
        "n_gold_unspoken": len(gold_unspoken),
    }


def gen_manifest(n_docs: int = 200, n_speakers: int = 50, n_communities: int = 25,
                 seed: int = 0) -> list[UtteranceManifestRow]:
    """Synthetic utterance manifest with community-structured speakers.

    Speakers are grouped into gender-balanced communities and each document
    draws its speakers from a single community, so the doc-speaker graph
    decomposes into components of varied size that a packer can actually
    place. Utterances alternate speakers, keeping per-doc gender hours
    close to the global mix.
    """
    rng = np.random.default_rng([seed, 7717])
    communities: list[list[tuple[str, str]]] = [[] for _ in range(n_communities)]
    for k in range(n_speakers):
        c = k % n_communities
        communities[c].append((f"spk_{k:03d}", "M" if len(communities[c]) % 2 == 0 else "F"))
    rows: list[UtteranceManifestRow] = []
    for d in range(n_docs):
        c = int(rng.integers(0, n_communities))
        members = communities[c]
        picks = list(members) if len(members) > 1 else members
        n_utts = int(rng.integers(20, 41))
        t = 0.0
        for u in range(n_utts):
            spk, gender = picks[u % len(picks)]
            dur = float(rng.uniform(3.0, 10.0))
            rows.append(
                UtteranceManifestRow(
                    utt_id=f"doc_{d:03d}_u{u:04d}",
                    doc_id=f"doc_{d:03d}",
                    speaker_id=spk,
                    gender=gender,
                    duration_s=dur,
                    start_s=t,
                    end_s=t + dur,
                    text_src="",
                    text_tgt="",
                )
            )
            t += dur
    return rows


def write_bundle(bundle: SynthBundle, out_dir) -> Path:
    """Write one meeting's artifacts in every core file format."""
    out = Path(out_dir) / bundle.doc_id
    out.mkdir(parents=True, exist_ok=True)
    bundle.vocab.to_file(out / "vocab.txt")
    (out / "transcript.txt").write_text(bundle.transcript_text, encoding="utf-8")
    (out / "translation.txt").write_text(bundle.translation_text, encoding="utf-8")
    (out / "speakers.json").write_text(
        json.dumps(bundle.speakers, ensure_ascii=False, indent=1, sort_keys=True), encoding="utf-8"
    )
    write_posteriors(bundle.posteriors, out / "audio.lpost")
    with open(out / "segments.jsonl", "w", encoding="utf-8") as f:
        for si, (s, e) in enumerate(bundle.segments):
            f.write(json.dumps({"seg_id": f"seg_{si:03d}", "start_frame": int(s), "end_frame": int(e)}) + "\n")
        # per-segment posterior files
    for si, (s, e) in enumerate(bundle.segments):
        write_posteriors(bundle.posteriors.slice_frames(s, e), out / f"seg_{si:03d}.lpost")

    def emb_index(n):
        return [{"sent_id": f"{bundle.doc_id}_s{i:05d}", "merge_start": i, "merge_len": 1} for i in range(n)]

    write_embeddings(bundle.src_vectors.astype(np.float32), emb_index(len(bundle.src_vectors)), out / "src.lemb")
    write_embeddings(bundle.tgt_vectors.astype(np.float32), emb_index(len(bundle.tgt_vectors)), out / "tgt.lemb")

    gold_rows = []
    for i, g in enumerate(bundle.gold):
        gold_rows.append(
            {
                "sent_idx": i,
                "spoken": g.spoken,
                "start_frame": g.start_frame,
                "end_frame": g.end_frame,
                "spoken_tokens": g.spoken_tokens,
                "provenance": g.provenance,
                "speaker_id": bundle.sentence_speaker[i],
            }
        )
    meta = {
        "doc_id": bundle.doc_id,
        "hop_ms": bundle.hop_ms,
        "speakers": bundle.speakers,
        "n_sentences": len(bundle.transcript_sentences),
    }
    (out / "gold.json").write_text(json.dumps({"meta": meta, "sentences": gold_rows}, ensure_ascii=False, indent=1), encoding="utf-8")
    return out


def read_gold(doc_dir) -> tuple[dict, list[GoldSentence]]:
    data = json.loads((Path(doc_dir) / "gold.json").read_text(encoding="utf-8"))
    gold = [
        GoldSentence(
            spoken=row["spoken"],
            start_frame=row["start_frame"],
            end_frame=row["end_frame"],
            spoken_tokens=row["spoken_tokens"],
            provenance=row["provenance"],
        )
        for row in data["sentences"]
    ]
    return data["meta"], gold
