# Numerical core: matrix kernels, LQ design, regression pipeline, adaptive law
