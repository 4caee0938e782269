"""Quick check that the compiled module imports and its main entry points work."""

import json
import math

import rigor

XML = """<?xml version="1.0"?>
<article>
  <front><article-meta>
    <article-id pub-id-type="pmc">PMC4242</article-id>
    <abstract><p>Trial registered as ISRCTN17822126.</p></abstract>
  </article-meta></front>
  <body>
    <sec><title>Introduction</title><p>Background only.</p></sec>
    <sec sec-type="methods"><title>Methods</title>
      <p>The trial was registered at ClinicalTrials.gov (NCT04280705).</p>
      <p>Analysis code is available at https://github.com/example/analysis.</p>
    </sec>
  </body>
</article>"""


def main():
    doc = rigor.parse_document(XML)
    assert doc.pmcid == "PMC4242", doc.pmcid
    assert "NCT04280705" in doc.methods_text
    assert [s.title for s in doc.sections] == ["Introduction", "Methods"]

    hits = rigor.scan_document(doc)
    found = {(h.registry, h.identifier) for h in hits}
    assert ("ctgov", "NCT04280705") in found, found
    assert rigor.detect_nct_naive("cells from NCTC clone 929")
    assert not rigor.scan_registration_identifiers("cells from NCTC clone 929")

    verdict = rigor.run_detector("registry_scanner", doc)
    assert verdict.present and verdict.criterion == "registration"
    assert rigor.ToolVerdict.from_json(verdict.to_json()).pmcid == "PMC4242"

    ev = rigor.adjusted_scores(45, 12, 16, 27, ppr=0.9, pnr=0.8)
    tp, fp, fn = 45 * 0.9, 12 * 0.8, 16 * 0.9
    assert math.isclose(ev.precision, tp / (tp + fp))
    assert math.isclose(ev.recall, tp / (tp + fn))

    assert rigor.gwet_ac1([True, False, True], [True, False, True]) == 1.0
    stat, p = rigor.compare_accuracies(0.9, 200, 0.7, 200)
    assert stat > 0 and p < 0.001
    lo, hi = rigor.bland_altman([(1.0, 2.0), (2.0, 1.0)])[2:]
    assert lo < 0 < hi
    assert rigor.control_composition(10, 10, 8) == (4, 4)

    tools = ["a", "b", "c"]
    rows = [[bool(i >> j & 1) for j in range(3)] for i in range(8)]
    labels = [r[0] or r[2] for r in rows]
    model = rigor.train_ensemble(rows * 10, labels * 10, tools, seed=7)
    table = model.truth_table()
    assert rigor.parse_rule(model.rule(), tools) == table
    assert table == labels, (model.rule(), table)

    verdicts = [
        rigor.ToolVerdict("PMC1", "a", "blinding", True),
        rigor.ToolVerdict("PMC1", "b", "blinding", False),
        rigor.ToolVerdict("PMC2", "a", "blinding", True),
        rigor.ToolVerdict("PMC2", "b", "blinding", True),
    ]
    m = rigor.DetectionMatrix(verdicts, "blinding")
    assert m.disagreements() == ["PMC1"]
    queue = [json.loads(s) for s in m.disagreement_queue(seed=1)]
    assert [q["pmcid"] for q in queue] == ["PMC1"]
    assert "a" not in json.dumps(queue[0].get("evidence", []))

    print(f"rigor {rigor.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
