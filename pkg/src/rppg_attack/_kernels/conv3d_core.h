#ifndef RPPG_CONV3D_CORE_H
#define RPPG_CONV3D_CORE_H

/* Channels-last 3x3x3 convolution with temporal dilation.
 * xp is spatially zero-padded by one pixel: (N, H+2, W+2, C).
 * w is (3, 3, 3, C, K); K must be a multiple of 8. */
void conv3d_forward_k8(const double *xp, const double *w, const double *b,
                       double *out, int N, int H, int W, int C, int K, int d);

void conv3d_weight_grad_k8(const double *xp, const double *g, double *gw,
                           int N, int H, int W, int C, int K, int d);

#endif
