#pragma once

#include <refmap/image.hpp>

namespace refmap {

/// Camera-space unit normals of an object image plus its foreground mask.
struct NormalMap {
    HdrImage normals;  // xyz stored in the RGB channels
    Mask mask;

    int height() const { return normals.height(); }
    int width() const { return normals.width(); }
    Vec3 normal(int i, int j) const {
        return normals.pixel(i, j).transpose().cast<double>().matrix();
    }
    bool foreground(int i, int j) const { return mask(normals.index(i, j)); }

    /// Builds the mask from the stored vectors: a pixel is foreground when its vector is
    /// non-zero (the on-disk convention for background).
    static NormalMap from_vectors(HdrImage normals);

    /// Throws ValidationError unless masked normals have |n| within 1e-3 of 1 and n_z > 0.
    void validate() const;
};

/// Orthographic sphere filling a size x size image.
NormalMap sphere_normal_map(int size);
/// Single fronto-parallel plane: every pixel faces the camera.
NormalMap plane_normal_map(int height, int width);

} // namespace refmap
