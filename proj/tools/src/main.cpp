#include "swm/cli.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

int main(int argc, char** argv) {
#if defined(__GLIBC__)
    // Training reuses multi-megabyte activation buffers; keep them on the heap
    // instead of paying page faults for a fresh mmap on every allocation.
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, -1);
#endif
    return swm::cli::run(argc, argv);
}
