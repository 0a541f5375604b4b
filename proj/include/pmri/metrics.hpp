#pragma once

#include <cmath>
#include <vector>

#include "pmri/fft.hpp"
#include "pmri/grid.hpp"

namespace pmri {

/// Root-sum-of-squares coil combination, returned as a real-valued complex grid.
inline ComplexGrid sos_combine(const MultiChannelGrid& x) {
    ComplexGrid out(x.height(), x.width());
    for (std::size_t k = 0; k < x.plane(); ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.channels(); ++i) s += std::norm(x.channel(i)[k]);
        out.data()[k] = std::sqrt(s);
    }
    return out;
}

/// SOS magnitude image of multi-coil k-space.
inline ComplexGrid sos_image(const MultiChannelGrid& kspace) { return sos_combine(ifft2c(kspace)); }

inline constexpr double kSnrClampDb = 300.0;

/// 20 log10(||ref|| / ||ref - rec||), clamped at +300 dB for an exact match.
inline double snr_db(const ComplexGrid& ref, const ComplexGrid& rec) {
    if (!ref.same_shape(rec)) throw DimensionError("snr_db: reference and reconstruction shapes differ");
    const double ref_norm = norm2(ref.data());
    if (!(ref_norm > 0.0)) throw ValidationError("snr_db: reference has zero norm");
    double err = 0.0;
    for (std::size_t k = 0; k < ref.size(); ++k) err += std::norm(ref.data()[k] - rec.data()[k]);
    if (err == 0.0) return kSnrClampDb;
    return std::min(kSnrClampDb, 20.0 * std::log10(ref_norm / std::sqrt(err)));
}

/// SNR of the SOS images of two multi-coil k-space data sets.
inline double kspace_snr_db(const MultiChannelGrid& ref_kspace, const MultiChannelGrid& rec_kspace) {
    if (!ref_kspace.same_shape(rec_kspace)) throw DimensionError("snr: k-space shapes differ");
    return snr_db(sos_image(ref_kspace), sos_image(rec_kspace));
}

}  // namespace pmri
