#pragma once

#include <filesystem>
#include <vector>

#include "pmri/cgrid.hpp"
#include "pmri/config.hpp"
#include "pmri/train.hpp"

namespace pmri {

// Dataset directory layout:
//   manifest.json         generating config, its hash, item count, fallback flags
//   images.cgrid          [count, H, W]     ground-truth images
//   sensitivities.cgrid   [N, H, W]         shared coil sensitivities
//   masks.cgrid           [count, H, W]     1 = kept
//   kspace.cgrid          [count, N, H, W]  fully sampled noiseless coil k-space
//   measurements.cgrid    [count, N, H, W]  zero-filled noisy measurements b

inline void write_dataset(const std::filesystem::path& dir, const DatasetSpec& spec) {
    spec.validate();
    std::filesystem::create_directories(dir);
    const MultiChannelGrid sens = make_sensitivities(spec.sensitivities, spec.height, spec.width);
    std::vector<CgridArray> images, masks, kspace, meas;
    json fallbacks = json::array();
    for (std::size_t i = 0; i < spec.count; ++i) {
        GroundTruth g = make_item(spec, sens, i);
        images.push_back(to_array(g.image));
        masks.push_back(to_array(g.sample.mask));
        kspace.push_back(to_array(g.sample.target));
        meas.push_back(to_array(g.sample.b));
        fallbacks.push_back(g.mask_fallback);
    }
    write_cgrid(dir / "images.cgrid", stack(images));
    write_cgrid(dir / "sensitivities.cgrid", to_array(sens));
    write_cgrid(dir / "masks.cgrid", stack(masks));
    write_cgrid(dir / "kspace.cgrid", stack(kspace));
    write_cgrid(dir / "measurements.cgrid", stack(meas));
    const json cfg = to_json(spec);
    write_json_file(dir / "manifest.json", {{"format", "pmri-dataset"},
                                             {"version", 1},
                                             {"count", spec.count},
                                             {"config", cfg},
                                             {"config_hash", config_hash(cfg)},
                                             {"mask_fallback", fallbacks}});
}

struct LoadedDataset {
    std::vector<Sample> samples;
    std::string config_hash;
    std::uint64_t seed = 0;
};

inline LoadedDataset read_dataset(const std::filesystem::path& dir) {
    LoadedDataset d;
    const json m = read_json_file(dir / "manifest.json");
    try {
        d.config_hash = m.at("config_hash").get<std::string>();
        d.seed = m.at("config").at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw IoError((dir / "manifest.json").string() + ": malformed manifest: " + e.what());
    }
    const CgridArray masks = read_cgrid(dir / "masks.cgrid");
    const CgridArray kspace = read_cgrid(dir / "kspace.cgrid");
    const CgridArray meas = read_cgrid(dir / "measurements.cgrid");
    const std::size_t n = item_count(meas, 3);
    if (item_count(kspace, 3) != n || item_count(masks, 2) != n)
        throw DimensionError(dir.string() + ": item counts differ between dataset files");
    for (std::size_t i = 0; i < n; ++i) {
        Sample s{multichannel_item(kspace, i), multichannel_item(meas, i), mask_item(masks, i)};
        if (!s.target.same_shape(s.b) || s.mask.height() != s.b.height() || s.mask.width() != s.b.width())
            throw DimensionError(dir.string() + ": item " + std::to_string(i) + " has inconsistent shapes");
        d.samples.push_back(std::move(s));
    }
    return d;
}

}  // namespace pmri
