#include <string.h>
#include "conv3d_core.h"

typedef double v8 __attribute__((vector_size(64)));

static inline v8 load8(const double *p) {
    v8 v;
    memcpy(&v, p, sizeof v);
    return v;
}

static inline void store8(double *p, v8 v) { memcpy(p, &v, sizeof v); }

/* eight consecutive output columns share each weight row */
static inline void tap_block8(v8 *restrict acc, const double *restrict xr,
                              const double *restrict wk, int C, int K) {
    for (int ci = 0; ci < C; ++ci) {
        const v8 wv = load8(wk + (size_t)ci * K);
        for (int j = 0; j < 8; ++j)
            acc[j] += xr[j * C + ci] * wv;
    }
}

static inline void tap_single(v8 *restrict acc, const double *restrict xr,
                              const double *restrict wk, int C, int K) {
    for (int ci = 0; ci < C; ++ci)
        *acc += xr[ci] * load8(wk + (size_t)ci * K);
}

void conv3d_forward_k8(const double *xp, const double *w, const double *b,
                       double *out, int N, int H, int W, int C, int K, int d) {
    const int Hp = H + 2, Wp = W + 2;
    const size_t tap_stride = (size_t)C * K;
    for (int kb = 0; kb < K; kb += 8) {
        const v8 bias = load8(b + kb);
        for (int n = 0; n < N; ++n) {
            for (int h = 0; h < H; ++h) {
                int w0 = 0;
                for (; w0 + 8 <= W; w0 += 8) {
                    v8 acc[8];
                    for (int j = 0; j < 8; ++j)
                        acc[j] = bias;
                    for (int kt = 0; kt < 3; ++kt) {
                        const int tn = n + (kt - 1) * d;
                        if (tn < 0 || tn >= N)
                            continue;
                        for (int kh = 0; kh < 3; ++kh)
                            for (int kw = 0; kw < 3; ++kw)
                                tap_block8(acc,
                                           xp + (((size_t)tn * Hp + h + kh) * Wp + w0 + kw) * C,
                                           w + ((kt * 3 + kh) * 3 + kw) * tap_stride + kb, C, K);
                    }
                    for (int j = 0; j < 8; ++j)
                        store8(out + (((size_t)n * H + h) * W + w0 + j) * K + kb, acc[j]);
                }
                for (; w0 < W; ++w0) {
                    v8 acc = bias;
                    for (int kt = 0; kt < 3; ++kt) {
                        const int tn = n + (kt - 1) * d;
                        if (tn < 0 || tn >= N)
                            continue;
                        for (int kh = 0; kh < 3; ++kh)
                            for (int kw = 0; kw < 3; ++kw)
                                tap_single(&acc,
                                           xp + (((size_t)tn * Hp + h + kh) * Wp + w0 + kw) * C,
                                           w + ((kt * 3 + kh) * 3 + kw) * tap_stride + kb, C, K);
                    }
                    store8(out + (((size_t)n * H + h) * W + w0) * K + kb, acc);
                }
            }
        }
    }
}

void conv3d_weight_grad_k8(const double *xp, const double *g, double *gw,
                           int N, int H, int W, int C, int K, int d) {
    const int Hp = H + 2, Wp = W + 2;
    const size_t tap_stride = (size_t)C * K;
    /* position-major order keeps the whole weight gradient resident in L1 */
    for (int n = 0; n < N; ++n) {
        for (int kt = 0; kt < 3; ++kt) {
            const int tn = n + (kt - 1) * d;
            if (tn < 0 || tn >= N)
                continue;
            for (int h = 0; h < H; ++h) {
                for (int ww = 0; ww < W; ++ww) {
                    const double *gr = g + (((size_t)n * H + h) * W + ww) * K;
                    for (int kb = 0; kb < K; kb += 8) {
                        const v8 gv = load8(gr + kb);
                        for (int kh = 0; kh < 3; ++kh) {
                            for (int kw = 0; kw < 3; ++kw) {
                                const double *xr = xp + (((size_t)tn * Hp + h + kh) * Wp + ww + kw) * C;
                                double *gt = gw + ((kt * 3 + kh) * 3 + kw) * tap_stride + kb;
                                for (int ci = 0; ci < C; ++ci)
                                    store8(gt + (size_t)ci * K, load8(gt + (size_t)ci * K) + xr[ci] * gv);
                            }
                        }
                    }
                }
            }
        }
    }
}
