"""From raw transcript text to tokenized sentences.

Speaker turns are recovered from NAME-colon markers, sentences split at
punctuation (closing quotes stay attached), and tokenization keeps every
CJK character separate while code-mixed words and numbers stay whole.
"""

from longalign import textproc

raw = """主席: 各位議員早晨。今日會議開始!
第一項議程係2021年財政預算。
陳議員: 多謝主席。我想問吓ok唔ok?
"""

extraction = textproc.extract_speaker_turns(raw)
for turn in extraction.turns:
    print(f"[{turn.speaker_id}] {turn.text!r}")

sentences = textproc.split_sentences(extraction.turns[0].text)
print("\nsentences of the first turn:")
for s in sentences:
    print(" ", s.text, "->", s.tokens)

print("\ncode-mixed tokenization:")
print(" ", textproc.tokenize("我哋ok"))
print(" ", textproc.tokenize("2021年預算"))

lex = textproc.PronLexicon({"你": ["nei5"], "好": ["hou2"], "早": ["zou2"], "晨": ["san4"]})
roman, unmapped = textproc.romanize(["早", "晨", "你", "好", "喎"], lex)
print("\nromanized:", roman, f"({unmapped} unmapped token passed through)")

doc = textproc.doc_from_text(raw, "meeting_demo")
print("\nwhole document:", len(doc.turns), "turns,", len(doc.sentences), "sentences,",
      len(doc.all_tokens()), "tokens")
