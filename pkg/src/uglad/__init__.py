"""Sparse precision-matrix recovery with an unsupervised, deep unrolled graphical lasso.

Typical use::

    from uglad import data, fit, metrics
    truth = data.generate_precision(25, 0.1, seed=0)
    X = data.sample_mvn(truth, 50, seed=1)
    result = fit.fit_cv(X, fit.FitConfig(mode="cv"))
    print(metrics.aupr_auc(result.precision, truth))
"""

__version__ = "0.1.0"
