"""``leadsheet`` command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 generation dead end.
Paths given as ``-`` read stdin or write stdout.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

from . import remi, xval
from .conditioning import (
    EmptyLyrics, StylePrompt, build_prefix, default_lexicon, default_plan, g2p, parse_lyrics,
    parse_sections,
)
from .core import TrackKind, select_stems
from .editor import apply_edit, parse_edit_spec
from .generator import DeadEnd, SamplerConfig, generate, header_tokens_of
from .grammar import Grammar
from .ingest import corpus_stats, ingest_corpus, load_sheets
from .ingest.sheetio import dumps as sheet_dumps
from .ingest.sheetio import loads as sheet_loads
from .metrics import evaluate
from .ngram import NGramModel, train
from .vocab import load_vocab, vocab_for_inventory

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DEADEND = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- I/O helpers ------------------------------------------------------------------


def _read_bytes(path: str) -> bytes:
    return sys.stdin.buffer.read() if path == "-" else Path(path).read_bytes()


def _read_text(path: str) -> str:
    return sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")


def _write(path: str | None, data: str | bytes) -> None:
    if path in (None, "-"):
        if isinstance(data, bytes):
            sys.stdout.buffer.write(data)
            sys.stdout.buffer.flush()
        else:
            sys.stdout.write(data)
            sys.stdout.flush()
        return
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, bytes):
        p.write_bytes(data)
    else:
        p.write_text(data, encoding="utf-8")


def _vocab(args):
    if getattr(args, "vocab", None):
        return load_vocab(args.vocab)
    inv = getattr(args, "inventory", None)
    if inv is None and getattr(args, "language", "en") == "zh-pinyin":
        inv = "pinyin"
    return vocab_for_inventory(inv or "arpabet")


def _read_tokens(path: str, vocab) -> remi.TokenSeq:
    data = _read_bytes(path)
    if data[:4] == remi.MAGIC:
        ts = remi.from_bytes(data)
        remi.check_vocab(ts, vocab)
        return ts
    seqs = remi.from_text(data.decode("utf-8"), vocab)
    if len(seqs) != 1:
        raise ValueError(f"expected one token sequence, found {len(seqs)}")
    return seqs[0]


def _stems(spec: str | None):
    if not spec:
        return None
    try:
        return {TrackKind.parse(s) for s in spec.split(",") if s.strip()}
    except ValueError as e:
        raise UsageError(f"--stems: {e}") from None


def _style(args) -> StylePrompt:
    base: dict = {}
    if args.style:
        base = json.loads(_read_text(args.style))
        unknown = set(base) - {"tempo_bpm", "time_sig", "key", "genre", "sections"}
        if unknown:
            raise ValueError(f"unknown style keys {sorted(unknown)}")
    if args.tempo is not None:
        base["tempo_bpm"] = args.tempo
    if args.time_sig:
        n, _, d = args.time_sig.partition("/")
        base["time_sig"] = (int(n), int(d))
    if args.key:
        tonic, _, mode = args.key.partition(":")
        base["key"] = (int(tonic), mode or "major")
    if args.genre:
        base["genre"] = args.genre
    if args.sections:
        base["sections"] = parse_sections(args.sections)
    return StylePrompt(
        tempo_bpm=int(base.get("tempo_bpm", 120)),
        time_sig=tuple(base.get("time_sig", (4, 4))),
        key=(int(base.get("key", (0, "major"))[0]), base.get("key", (0, "major"))[1]),
        genre=base.get("genre"),
        sections=tuple((str(a), int(b)) for a, b in base.get("sections", ())),
    )


def _pick_models(paths: list[str], genre: str | None):
    models = [NGramModel.load(p) for p in paths]
    cond = next((m for m in models if genre and m.genre == genre), models[0])
    uncond = next((m for m in models if m.genre == "all"), cond)
    return cond, uncond


def _sampler(args, **extra) -> SamplerConfig:
    hard = {"forced_phonemes"}
    if getattr(args, "no_force_phonemes", False):
        hard.discard("forced_phonemes")
    if getattr(args, "scale", False):
        hard.add("scale")
    if getattr(args, "max_leap", None) is not None:
        hard.add("max_leap")
    try:
        soft = {}
        for item in getattr(args, "soft", None) or ():
            k, _, w = item.partition("=")
            soft[k] = float(w) if w else 1.0
        return SamplerConfig(temperature=args.temp, top_k=args.top_k, guidance=args.guidance, seed=args.seed,
                             max_tokens=args.max_tokens, hard_constraints=frozenset(hard),
                             max_leap=args.max_leap if args.max_leap is not None else 12, soft_penalties=soft,
                             **extra)
    except ValueError as e:
        raise UsageError(f"bad sampling option: {e}") from None


# -- subcommands ---------------------------------------------------------------------


def cmd_vocab(args) -> int:
    v = vocab_for_inventory(args.inventory)
    _write(args.output, v.dumps())
    return EXIT_OK


def cmd_encode(args) -> int:
    vocab = _vocab(args)
    ls = sheet_loads(_read_text(args.input))
    if args.format == "xval":
        if args.out == "bin":
            raise UsageError("xval encoding has no binary form")
        _write(args.output, xval.to_text(xval.encode_xval(ls, vocab), vocab))
        return EXIT_OK
    ts = remi.encode(ls, vocab)
    _write(args.output, remi.to_bytes(ts) if args.out == "bin" else remi.to_text(ts, vocab))
    return EXIT_OK


def cmd_decode(args) -> int:
    vocab = _vocab(args)
    if args.format == "xval":
        vs = xval.from_text(_read_text(args.input), vocab)
        ls = xval.decode_xval(vs, vocab, snap=args.snap)
    else:
        ls = remi.decode(_read_tokens(args.input, vocab), vocab)
    _write(args.output, sheet_dumps(ls))
    return EXIT_OK


def cmd_validate(args) -> int:
    vocab = _vocab(args)
    data = _read_bytes(args.input)
    if data.lstrip()[:1] == b"{":
        sheet_loads(data.decode("utf-8"))
        print("ok: lead sheet")
        return EXIT_OK
    if data[:4] == remi.MAGIC:
        seqs = [remi.from_bytes(data)]
    else:
        seqs = remi.from_text(data.decode("utf-8"), vocab)
    status = EXIT_OK
    g = Grammar(vocab)
    for i, ts in enumerate(seqs):
        remi.check_vocab(ts, vocab)
        verdict = g.validate(ts.tokens)
        if verdict:
            print(f"ok: sequence {i} ({len(ts)} tokens)")
        else:
            print(f"invalid: sequence {i} at token {verdict.index}: {verdict.reason}")
            status = EXIT_DATA
    return status


def cmd_ingest(args) -> int:
    out = Path(args.output)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        items = ingest_corpus(args.input)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    for it in items:
        _write(str(out / it.genre / f"{it.name}.json"), sheet_dumps(it.sheet))
    print(f"ingested {len(items)} files", file=sys.stderr)
    return EXIT_OK


def cmd_train(args) -> int:
    vocab = _vocab(args)
    items = load_sheets(args.input, args.genre)
    model = train((remi.encode(it.sheet, vocab) for it in items), vocab, args.order, args.genre)
    _write(args.output, model.dumps())
    return EXIT_OK


def cmd_generate(args) -> int:
    cfg = _sampler(args)
    stems = _stems(args.stems)
    vocab = _vocab(args)
    sp = _style(args)
    m_cond, m_uncond = _pick_models(args.model, sp.genre)
    pq, plan = None, sp.sections
    if args.lyrics:
        lp = parse_lyrics(_read_text(args.lyrics), args.language)
        try:
            pq = g2p(lp, default_lexicon() if args.language == "en" else None)
        except EmptyLyrics:
            pq = None  # section tags only: instrumental
        if not plan:
            plan = default_plan(lp, pq, sp.time_sig)
    ref = _read_tokens(args.reference, vocab) if args.reference else None
    prefix = build_prefix(sp, vocab, pq, ref)
    toks = []
    for tok in generate(m_cond, m_uncond, prefix, pq, cfg, vocab=vocab, plan=plan,
                        relax_on_deadend=args.relax_on_deadend):
        toks.append(tok)
        if args.stream:
            sys.stdout.write(vocab.name(tok) + "\n")
            sys.stdout.flush()
    full = header_tokens_of(prefix, vocab) + toks
    ls = remi.decode_ids(full, vocab)
    if stems:
        ls = select_stems(ls, stems)
    if args.stream:
        if args.output and args.output != "-":
            _write(args.output, sheet_dumps(ls))
    else:
        _write(args.output, sheet_dumps(ls))
    return EXIT_OK


def cmd_edit(args) -> int:
    cfg = _sampler(args)
    vocab = _vocab(args)
    ls = sheet_loads(_read_text(args.input))
    spec = json.loads(_read_text(args.spec))
    mask, lyrics, language = parse_edit_spec(spec)
    m_cond, m_uncond = _pick_models(args.model, None)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        out = apply_edit(ls, mask, m_cond, m_uncond, cfg, vocab=vocab, lyrics=lyrics, language=language,
                         n_candidates=args.candidates, right_ctx_bars=args.right_ctx,
                         relax_on_deadend=args.relax_on_deadend)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    _write(args.output, sheet_dumps(out))
    return EXIT_OK


def cmd_score(args) -> int:
    vocab = _vocab(args)
    ls = sheet_loads(_read_text(args.input))
    pq, plan = None, parse_sections(args.sections) if args.sections else ()
    if args.lyrics:
        lp = parse_lyrics(_read_text(args.lyrics), args.language)
        try:
            pq = g2p(lp, default_lexicon() if args.language == "en" else None)
        except EmptyLyrics:
            pq = None
        if not plan:
            plan = tuple((label, 1) for label, _ in lp.lines)
    report = evaluate(ls, vocab, pq, plan, unit=args.unit)
    _write(args.output, report.to_json() + "\n")
    return EXIT_OK


def cmd_corpus_stats(args) -> int:
    vocab = _vocab(args)
    items = load_sheets(args.input)
    _write(args.output, json.dumps(corpus_stats([it.sheet for it in items], vocab), sort_keys=True, indent=2) + "\n")
    return EXIT_OK


# -- parser ------------------------------------------------------------------------------


def _sampling_flags(p) -> None:
    p.add_argument("--model", action="append", required=True, help="model file; repeat to give genre models")
    p.add_argument("--guidance", type=float, default=1.0)
    p.add_argument("--top-k", type=int, default=32)
    p.add_argument("--temp", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-tokens", type=int, default=4096)
    p.add_argument("--scale", action="store_true", help="keep vocal pitches in the key's scale")
    p.add_argument("--max-leap", type=int, default=None, help="largest vocal interval in semitones")
    p.add_argument("--soft", action="append", metavar="NAME=WEIGHT",
                   help="soft penalty: off_scale, leap or off_chord")
    p.add_argument("--no-force-phonemes", action="store_true")
    p.add_argument("--relax-on-deadend", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="leadsheet", description="Lead sheet tokens, models and edits.")
    parser.add_argument("--vocab", help="vocabulary file (default: built-in ARPAbet vocabulary)")
    parser.add_argument("--config", help="JSON file of default option values")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("vocab", help="vocabulary tools")
    vsub = p.add_subparsers(dest="action", parser_class=_Parser)
    b = vsub.add_parser("build")
    b.add_argument("--inventory", default="arpabet", choices=("arpabet", "pinyin", "mixed"))
    b.add_argument("-o", "--output", default="-")
    b.set_defaults(func=cmd_vocab)

    p = sub.add_parser("encode", help="lead sheet JSON to tokens")
    p.add_argument("input")
    p.add_argument("-o", "--output", default="-")
    p.add_argument("--format", choices=("remi", "xval"), default="remi")
    p.add_argument("--out", choices=("text", "bin"), default="text")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="tokens to lead sheet JSON")
    p.add_argument("input")
    p.add_argument("-o", "--output", default="-")
    p.add_argument("--format", choices=("remi", "xval"), default="remi")
    p.add_argument("--snap", action="store_true", help="round off-grid xVal values")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("validate", help="check token sequences against the grammar")
    p.add_argument("input")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("ingest", help="MIDI corpus directory to lead sheet JSON files")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="count an n-gram model over lead sheets")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--genre", default="all")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="sample a lead sheet")
    _sampling_flags(p)
    p.add_argument("--lyrics")
    p.add_argument("--language", choices=("en", "zh-pinyin"), default="en")
    p.add_argument("--style", help="style JSON: tempo_bpm, time_sig, key, genre, sections")
    p.add_argument("--tempo", type=int)
    p.add_argument("--time-sig")
    p.add_argument("--key", help="tonic pitch class and mode, e.g. 9:minor")
    p.add_argument("--genre")
    p.add_argument("--sections", help="plan such as verse:4,chorus:4")
    p.add_argument("--reference", help="token file to continue from")
    p.add_argument("--stems", help="comma-separated tracks to keep, e.g. vocal,chord")
    p.add_argument("--stream", action="store_true", help="print token names as they are sampled")
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("edit", help="in-paint a region of a lead sheet")
    p.add_argument("input")
    p.add_argument("--spec", required=True)
    _sampling_flags(p)
    p.add_argument("--candidates", type=int, default=16)
    p.add_argument("--right-ctx", type=int, default=2)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_edit)

    p = sub.add_parser("score", help="evaluate a lead sheet against its prompts")
    p.add_argument("input")
    p.add_argument("--lyrics")
    p.add_argument("--language", choices=("en", "zh-pinyin"), default="en")
    p.add_argument("--sections")
    p.add_argument("--unit", choices=("word", "syllable", "phoneme"))
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("corpus-stats", help="REMI vs xVal sequence lengths")
    p.add_argument("input")
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_corpus_stats)
    return parser


def parse_args(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            defaults = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config {args.config}: {e}") from None
        if not isinstance(defaults, dict):
            raise UsageError("config file must hold a JSON object")
        known = vars(args)
        for k, v in defaults.items():
            k = k.replace("-", "_")
            option = "--" + k.replace("_", "-")
            if k not in known:
                raise UsageError(f"unknown config option {k!r}")
            if f"{option}" not in argv and not any(a.startswith(option + "=") for a in argv):
                setattr(args, k, v)
    if not getattr(args, "func", None):
        raise UsageError(parser.format_usage().strip())
    return args


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if not e.code else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        # downstream closed the pipe (e.g. `| head`); stop quietly
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except DeadEnd as e:
        print(f"dead end: {e}", file=sys.stderr)
        return EXIT_DEADEND
    except (ValueError, KeyError, OSError, UnicodeDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
