"""A small synthetic study: three subjects, Individual scheme, RF on PSD features,
rendered as the markdown results table.

    python3 demos/synthetic_study.py
"""

from drowsiness import dataset, evaluation as ev, pipeline, reporting

recs = dataset.synth_cohort(3, 300, seed=1)
prepared = [pipeline.prepare(r, ("PSD5", "PSD_EOG6")) for r in recs]
for p in prepared:
    t = p.thresholds
    print(f"{p.key}: thresholds {t.th_minor:.3f} / {t.th_moder:.3f}, flagged ICA components {sorted(p.flagged)}")

scheme = ev.SchemeSpec("Individual", seed=3)
grid = [{"n_trees": 50, "max_depth": None}]
reports = [ev.run_scheme(prepared, scheme, ("RF", mode), task, grid=grid)
           for mode in ("PSD5", "PSD_EOG6") for task in ("Regression", "Classification")]
print()
print(reporting.render_markdown(reporting.report_document(reports)))
