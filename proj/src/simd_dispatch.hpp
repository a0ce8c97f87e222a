#pragma once

// Compiles the marked function twice, for AVX2 and for the baseline ISA, and
// picks one at load time. Neither clone enables FMA, so both round identically.
#if defined(__GNUC__) && !defined(__clang__) && defined(__x86_64__) && defined(__ELF__)
#define ATTRIB_SIMD_CLONES __attribute__((target_clones("avx2", "default")))
#else
#define ATTRIB_SIMD_CLONES
#endif
