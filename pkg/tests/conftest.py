import os

# pin BLAS threading before numpy loads: deterministic reductions and no
# small-matrix thread thrashing in the solver-heavy suites
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(_var, "1")
