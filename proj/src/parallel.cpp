#include "hecke/parallel.hpp"

#ifdef HECKE_HAVE_OPENMP
#include <omp.h>
#endif

namespace hecke {

int max_threads() {
#ifdef HECKE_HAVE_OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_threads(int n) {
#ifdef HECKE_HAVE_OPENMP
    if (n < 1) n = omp_get_num_procs();
    omp_set_num_threads(n);
#else
    (void)n;
#endif
}

bool openmp_enabled() {
#ifdef HECKE_HAVE_OPENMP
    return true;
#else
    return false;
#endif
}

} // namespace hecke
