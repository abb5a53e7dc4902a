#pragma once

#include <vector>

#include "nodfuse/ingest/volume.hpp"

namespace nodfuse::ingest {

/// Dense weight matrix mapping `n_in` samples on a unit grid to `n_out`
/// positions `x_j = j * step` via a not-a-knot cubic spline.
///
/// Row-major, n_out x n_in. Positions past the last sample are evaluated on
/// the end polynomial. n_in == 2 degenerates to linear, n_in == 3 to the
/// interpolating parabola.
std::vector<double> spline_weights(int n_in, int n_out, double step);

/// Resample to isotropic `target_spacing` (mm). Output dims are
/// ceil(n * s / target); intensities use separable cubic splines, the mask
/// nearest-neighbour. Throws ValidationError for axes with fewer than two
/// voxels or a non-positive target.
Volume resample(const Volume& v, double target_spacing);

} // namespace nodfuse::ingest
