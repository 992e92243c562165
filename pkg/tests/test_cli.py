import itertools
import json
from pathlib import Path

import pytest

from xelkit.cli import RunConfig, main, parse_script_blocks

DATA = Path(__file__).parent / "data"


def run(*argv):
    return main(list(argv))


@pytest.fixture()
def index_path(tmp_path):
    out = tmp_path / "index.tsv"
    code = run(
        "build-index", "--dump", str(DATA / "corpus.dump"), "--lang", "om",
        "--out", str(out), "--rules", str(DATA / "rules.txt"),
    )
    assert code == 0
    return out


def link_args(index_path, out, **kv):
    args = [
        "link",
        "--index", str(index_path),
        "--dataset", str(DATA / "mentions.jsonl"),
        "--out", str(out),
        "--lang", "om",
        "--rules", str(DATA / "rules.txt"),
        "--search-fixture", str(DATA / "search.json"),
        "--geo-fixture", str(DATA / "geo.json"),
        "--summaries", str(DATA / "summaries.json"),
    ]
    for flag, value in kv.items():
        name = "--" + flag.replace("_", "-")
        if value is True:
            args.append(name)
        else:
            args.extend([name, str(value)])
    return args


def read_jsonl(path):
    return [json.loads(line) for line in open(path, encoding="utf-8")]


# --- build-index -------------------------------------------------------------

def test_build_index_counts(index_path, capsys):
    # index built in fixture; rebuild to capture stdout
    code = run(
        "build-index", "--dump", str(DATA / "corpus.dump"), "--lang", "om",
        "--out", str(index_path), "--rules", str(DATA / "rules.txt"),
    )
    out = capsys.readouterr().out
    assert code == 0
    assert "pages: 13" in out
    assert "title map entries: 5" in out
    assert "prtm rows: 6" in out


def test_build_index_missing_dump(tmp_path):
    assert run("build-index", "--dump", str(tmp_path / "nope.dump"), "--lang", "om",
               "--out", str(tmp_path / "i.tsv")) == 2


def test_build_index_corrupt_dump(tmp_path, capsys):
    bad = tmp_path / "bad.dump"
    bad.write_text("page\tom\tA\nzzz\n", encoding="utf-8")
    code = run("build-index", "--dump", str(bad), "--lang", "om", "--out", str(tmp_path / "i.tsv"))
    assert code == 1
    assert "line 2" in capsys.readouterr().err


# --- link ---------------------------------------------------------------------

def test_link_chilika_scenario(index_path, tmp_path):
    out = tmp_path / "r.jsonl"
    assert run(*link_args(index_path, out, k=1)) == 0
    rows = {r["doc_id"]: r for r in read_jsonl(out)}
    chilika = rows["d1"]
    assert chilika["selected"] == "Chilika Lake"
    assert chilika["sources"]["Chilika Lake"] == ["MapSearch", "SearchTop"]


def test_link_deterministic_outputs(index_path, tmp_path):
    out1, out2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert run(*link_args(index_path, out1, k=5)) == 0
    assert run(*link_args(index_path, out2, k=5)) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_link_parallel_matches_serial(index_path, tmp_path):
    out1, out2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert run(*link_args(index_path, out1, k=5)) == 0
    assert run(*link_args(index_path, out2, k=5, workers=4)) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_link_empty_dataset(index_path, tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("", encoding="utf-8")
    out = tmp_path / "r.jsonl"
    args = link_args(index_path, out)
    args[args.index("--dataset") + 1] = str(empty)
    assert run(*args) == 0
    assert out.read_text(encoding="utf-8") == ""


def test_link_ablation_row_shape(index_path, tmp_path):
    out = tmp_path / "r.jsonl"
    assert run(*link_args(index_path, out, k=1, no_map=True, no_prtm=True)) == 0
    rows = read_jsonl(out)
    assert len(rows) == 8
    for row in rows:
        assert not any("MapSearch" in srcs for srcs in row["sources"].values())
        assert not any("PrTM" in srcs for srcs in row["sources"].values())


def test_link_config_file_with_flag_override(index_path, tmp_path):
    cfg = RunConfig(
        lang="om",
        index=str(index_path),
        dataset=str(DATA / "mentions.jsonl"),
        out=str(tmp_path / "from_config.jsonl"),
        rules=str(DATA / "rules.txt"),
        search_fixture=str(DATA / "search.json"),
        geo_fixture=str(DATA / "geo.json"),
        summaries=str(DATA / "summaries.json"),
        k=1,
    )
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg.to_dict()), encoding="utf-8")
    override = tmp_path / "override.jsonl"
    assert run("link", "--config", str(cfg_path), "--out", str(override), "--k", "5") == 0
    rows = {r["doc_id"]: r for r in read_jsonl(override)}
    assert "Nawala, Sri Lanka" in rows["d3"]["candidates"]  # only reachable at k=5


def test_link_missing_index_is_usage_error(tmp_path):
    assert run("link", "--index", str(tmp_path / "no.tsv"),
               "--dataset", str(DATA / "mentions.jsonl"),
               "--out", str(tmp_path / "o.jsonl")) == 2


# --- ablation battery ----------------------------------------------------------

def recall_of(path):
    rows = read_jsonl(path)
    linkable = [r for r in rows if r["gold"] is not None]
    return sum(1 for r in linkable if r["gold"] in r["candidates"]) / len(linkable)


def test_ablation_recall_ladder(index_path, tmp_path):
    # pinned fixture-golden values for the standard ablation rows
    rows = {
        "top1_no_map": (dict(k=1, no_map=True, no_prtm=True), 0.25),
        "top1": (dict(k=1, no_prtm=True), 0.375),
        "top5": (dict(k=5, no_prtm=True), 0.5),
        "top1_prtm": (dict(k=1), 0.625),
        "top5_prtm": (dict(k=5), 0.75),
    }
    got = {}
    for name, (kv, expected) in rows.items():
        out = tmp_path / f"{name}.jsonl"
        assert run(*link_args(index_path, out, **kv)) == 0
        got[name] = recall_of(out)
        assert got[name] == expected, name
    assert got["top1"] <= got["top5"]
    assert got["top1"] <= got["top1_prtm"]


def test_all_ablation_combos_expressible_and_round_trip():
    for k, no_map, no_prtm, no_pivot in itertools.product((1, 5), (False, True),
                                                          (False, True), (False, True)):
        cfg = RunConfig(k=k, no_map=no_map, no_prtm=no_prtm, no_pivot=no_pivot,
                        pivot_langs="am")
        again = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert again == cfg
        gc = again.gen_config()
        assert (gc.k, gc.use_map, gc.use_prtm, gc.use_pivot) == (
            k, not no_map, not no_prtm, not no_pivot
        )


def test_parse_script_blocks():
    assert parse_script_blocks("0B00-0B7F:0900-097F") == (((0x0B00, 0x0B7F), (0x0900, 0x097F)),)
    assert parse_script_blocks("") == ()


# --- evaluate -------------------------------------------------------------------

def test_evaluate_report(index_path, tmp_path, capsys):
    results = tmp_path / "r.jsonl"
    assert run(*link_args(index_path, results, k=5, pivot=True, pivot_langs="am")) == 0
    report_path = tmp_path / "report.json"
    code = run("evaluate", "--results", str(results), "--dataset", str(DATA / "mentions.jsonl"),
               "--out", str(report_path), "--per-type", "--recall-k", "1,5")
    out = capsys.readouterr().out
    assert code == 0
    assert "Accu" in out and "Rec@5" in out and "Rec@n" in out
    assert "GPE" in out and "LOC" in out and "PER" in out and "ORG" in out
    report = json.loads(report_path.read_text(encoding="utf-8"))
    assert report["linking_accuracy"] <= report["gold_candidate_recall"]
    assert report["gold_candidate_recall"] == 0.875
    assert report["linking_accuracy"] == 0.875


def test_evaluate_mismatched_ids(index_path, tmp_path):
    results = tmp_path / "r.jsonl"
    assert run(*link_args(index_path, results, k=1)) == 0
    rows = read_jsonl(results)
    rows[0]["doc_id"] = "wrong"
    results.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    assert run("evaluate", "--results", str(results),
               "--dataset", str(DATA / "mentions.jsonl")) == 1


# --- coverage ---------------------------------------------------------------------

def test_coverage_somali_pair(index_path, capsys):
    code = run("coverage", "--index", str(index_path),
               "--dataset", str(DATA / "coverage_pair.jsonl"),
               "--lang", "om", "--rules", str(DATA / "rules.txt"))
    out = capsys.readouterr().out
    assert code == 0
    assert "mention token coverage: 0.5000" in out


def test_coverage_with_ratio(index_path, tmp_path, capsys):
    results = tmp_path / "r.jsonl"
    assert run(*link_args(index_path, results, k=5, pivot=True, pivot_langs="am")) == 0
    code = run("coverage", "--index", str(index_path),
               "--dataset", str(DATA / "mentions.jsonl"),
               "--lang", "om", "--rules", str(DATA / "rules.txt"),
               "--results", str(results))
    out = capsys.readouterr().out
    assert code == 0
    assert "mention token coverage: 0.2500" in out
    assert "recall/coverage ratio: 3.5000" in out


def test_coverage_missing_dataset(index_path, tmp_path):
    assert run("coverage", "--index", str(index_path),
               "--dataset", str(tmp_path / "nope.jsonl")) == 2
