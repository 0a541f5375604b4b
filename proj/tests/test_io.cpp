#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "oracles.hpp"
#include "pmri/config.hpp"
#include "pmri/dataset_io.hpp"
#include "pmri/metrics.hpp"
#include "pmri/timing.hpp"

using namespace pmri;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("pmri_test_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<unsigned char> slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::vector<unsigned char>& b) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

std::string io_error_message(const fs::path& p) {
    try {
        read_cgrid(p);
    } catch (const IoError& e) {
        return e.what();
    }
    return {};
}

json small_sim_config() {
    return {{"height", 16}, {"width", 16}, {"coils", 2}, {"acceleration", 2.0}, {"noise_sigma", 0.01},
            {"seed", 7}, {"count", 3}, {"mask_seed", 2}, {"sensitivity_seed", 1}};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(PMRI_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cgrid, RoundTripIsBitwiseInDoublePrecision) {
    oracle::reseed(1);
    const MultiChannelGrid x = oracle::random_multi(4, 64, 64);
    const fs::path dir = scratch("rt64");
    write_cgrid(dir / "a.cgrid", to_array(x));
    const CgridArray back = read_cgrid(dir / "a.cgrid");
    EXPECT_EQ(back.dims, (std::vector<std::uint64_t>{4, 64, 64}));
    EXPECT_EQ(multichannel_item(back, 0), x);
    EXPECT_EQ(fs::file_size(dir / "a.cgrid"), 4 + 2 + 2 + 3 * 8 + 1 + x.size() * 16);
}

TEST(Cgrid, SinglePrecisionRoundTripsFloatValuesExactly) {
    oracle::reseed(2);
    MultiChannelGrid x = oracle::random_multi(4, 64, 64);
    for (auto& v : x.data()) v = {double(float(v.real())), double(float(v.imag()))};
    const CgridArray a = to_array(x, Precision::Float32);
    const CgridArray back = decode_cgrid(encode_cgrid(a));
    EXPECT_EQ(back, a);
    EXPECT_EQ(encode_cgrid(a).size(), 4 + 2 + 2 + 3 * 8 + 1 + x.size() * 8);
}

TEST(Cgrid, HeaderLayoutIsLittleEndian) {
    const CgridArray a{{2}, {cplx{1.0, -2.0}, cplx{0.5, 0.0}}, Precision::Float64};
    const auto bytes = encode_cgrid(a);
    ASSERT_EQ(bytes.size(), 8u + 8u + 1u + 32u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "CGRD");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[5], 0);
    EXPECT_EQ(bytes[6], 1);
    EXPECT_EQ(bytes[8], 2);
    EXPECT_EQ(bytes[16], 8);
    // 1.0 as an IEEE double is 0x3FF0000000000000.
    EXPECT_EQ(bytes[17 + 7], 0x3F);
    EXPECT_EQ(bytes[17 + 6], 0xF0);
}

TEST(Cgrid, CorruptFilesRaiseIoErrorNamingThePath) {
    const fs::path dir = scratch("bad");
    const CgridArray a{{2, 3}, std::vector<cplx>(6, cplx{1.0, 2.0}), Precision::Float64};
    write_cgrid(dir / "ok.cgrid", a);
    auto bytes = slurp(dir / "ok.cgrid");

    auto magic = bytes;
    magic[0] = 'X';
    spit(dir / "magic.cgrid", magic);
    auto trunc = bytes;
    trunc.resize(trunc.size() - 5);
    spit(dir / "trunc.cgrid", trunc);
    auto width = bytes;
    width[8 + 16] = 3;
    spit(dir / "width.cgrid", width);
    auto version = bytes;
    version[4] = 9;
    spit(dir / "version.cgrid", version);
    spit(dir / "tiny.cgrid", {'C', 'G'});

    for (const char* name : {"magic.cgrid", "trunc.cgrid", "width.cgrid", "version.cgrid", "tiny.cgrid", "missing.cgrid"}) {
        const std::string msg = io_error_message(dir / name);
        EXPECT_NE(msg.find(name), std::string::npos) << name << ": " << msg;
    }
    EXPECT_NE(io_error_message(dir / "magic.cgrid").find("magic"), std::string::npos);
    EXPECT_THROW(encode_cgrid(CgridArray{{3}, std::vector<cplx>(2), Precision::Float64}), DimensionError);
}

TEST(Cgrid, MaskEncoding) {
    const SamplingMask m(2, 2, {true, false, false, true});
    const CgridArray a = to_array(m);
    EXPECT_EQ(a.precision, Precision::Float32);
    EXPECT_EQ(a.data[0], cplx(1.0));
    EXPECT_EQ(a.data[1], cplx(0.0));
    EXPECT_EQ(mask_item(decode_cgrid(encode_cgrid(a)), 0), m);
}

TEST(Config, UnknownFieldIsRejectedByName) {
    json j = small_sim_config();
    j["acceleraton"] = 3.0;
    try {
        dataset_spec_from_json(j);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("acceleraton"), std::string::npos);
    }
    EXPECT_THROW(pslr_config_from_json({{"lamda", 1.0}}), ValidationError);
    EXPECT_THROW(train_config_from_json({{"epoch", 1}}), ValidationError);
    EXPECT_THROW(train_config_from_json({{"epochs", "many"}}), ValidationError);
    EXPECT_THROW(dataset_spec_from_json({{"pattern", "spiral"}}), ValidationError);
}

TEST(Config, ParsedValuesAndDefaults) {
    const DatasetSpec s = dataset_spec_from_json(small_sim_config());
    EXPECT_EQ(s.height, 16u);
    EXPECT_EQ(s.sensitivities.coils, 2u);
    EXPECT_EQ(s.mask.acceleration, 2.0);
    EXPECT_EQ(s.count, 3u);
    const PslrConfig p = pslr_config_from_json({{"filter_size", {5, 7}}, {"lambda", 0.5}});
    EXPECT_EQ(p.filter_h, 5u);
    EXPECT_EQ(p.filter_w, 7u);
    EXPECT_EQ(p.lambda, 0.5);
    EXPECT_EQ(p.beta, PslrConfig{}.beta);
    const TrainConfig t = train_config_from_json({{"epochs", 3}, {"loss", "image"}, {"train_beta", false}});
    EXPECT_EQ(t.epochs, 3u);
    EXPECT_EQ(t.loss, LossDomain::SosImage);
    EXPECT_FALSE(t.train_beta);
}

TEST(Config, HashIsStableAndKeyOrderInsensitive) {
    const json a = json::parse(R"({"a": 1, "b": [1, 2], "c": {"x": 0.5}})");
    const json b = json::parse(R"({"c": {"x": 0.5}, "b": [1, 2], "a": 1})");
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 16u);
    EXPECT_NE(config_hash(a), config_hash(json::parse(R"({"a": 2, "b": [1, 2], "c": {"x": 0.5}})")));
    EXPECT_EQ(config_hash(json::object()), config_hash(json::parse("{}")));
    // Serialized configs hash identically after a parse round trip.
    const json round = to_json(dataset_spec_from_json(small_sim_config()));
    EXPECT_EQ(config_hash(round), config_hash(to_json(dataset_spec_from_json(round))));
}

TEST(Config, InvalidJsonFile) {
    const fs::path dir = scratch("json");
    std::ofstream(dir / "bad.json") << "{ not json";
    EXPECT_THROW(read_json_file(dir / "bad.json"), ValidationError);
    EXPECT_THROW(read_json_file(dir / "absent.json"), IoError);
}

TEST(Checkpoint, RoundTripPreservesEveryParameter) {
    oracle::reseed(3);
    for (bool hybrid : {false, true}) {
        NetParams p = init_params(2, 4, hybrid, 11, 3, 0.7, 5);
        NetParams g = p;
        for_each_tensor(p, g, [](std::span<double> t, std::span<double>) {
            for (double& v : t) v = oracle::gauss();
        });
        p.log_beta_i = -0.25;
        const fs::path dir = scratch(hybrid ? "ckpt_h" : "ckpt_k");
        const json cfg = to_json(TrainConfig{});
        save_checkpoint(dir, p, cfg, 11);
        const NetParams q = load_checkpoint(dir);
        EXPECT_EQ(q.hybrid(), hybrid);
        EXPECT_EQ(q.unrolls, 3u);
        EXPECT_EQ(q.log_beta_k, p.log_beta_k);
        EXPECT_EQ(q.log_beta_i, p.log_beta_i);
        for (std::size_t l = 0; l < kDenoiserLayers; ++l) {
            EXPECT_EQ(q.kspace.layers[l].weight, p.kspace.layers[l].weight);
            EXPECT_EQ(q.kspace.layers[l].bias, p.kspace.layers[l].bias);
            if (hybrid) EXPECT_EQ(q.image->layers[l].weight, p.image->layers[l].weight);
        }
        const json m = read_json_file(dir / "manifest.json");
        EXPECT_EQ(m.at("train_config_hash").get<std::string>(), config_hash(cfg));
        EXPECT_EQ(m.at("seed").get<std::uint64_t>(), 11u);
        // Weight tensors are stored (out, in, k, k) row-major.
        const CgridArray w = read_cgrid(dir / "kspace_layer1_weight.cgrid");
        EXPECT_EQ(w.dims, (std::vector<std::uint64_t>{4, 4, 5, 5}));
        EXPECT_EQ(w.data[1 * 100 + 2 * 25 + 3 * 5 + 4].real(), p.kspace.layers[1].weight(1, (2 * 5 + 3) * 5 + 4));
    }
    EXPECT_THROW(load_checkpoint(scratch("ckpt_missing")), IoError);
}

TEST(Metrics, SnrValues) {
    ComplexGrid ref(2, 2, {1.0, 2.0, 3.0, 4.0});
    EXPECT_EQ(snr_db(ref, ref), kSnrClampDb);
    EXPECT_NEAR(snr_db(ref, ComplexGrid(2, 2)), 0.0, 1e-12);
    ComplexGrid rec = ref;
    // An error with one tenth of the reference norm is 20 dB.
    const double e = norm2(ref.data()) / 10.0;
    rec(0, 0) += e;
    EXPECT_NEAR(snr_db(ref, rec), 20.0, 1e-12);
    EXPECT_THROW(snr_db(ref, ComplexGrid(2, 3)), DimensionError);
    EXPECT_THROW(snr_db(ComplexGrid(2, 2), ref), ValidationError);
}

TEST(Metrics, SosCombine) {
    MultiChannelGrid x(2, 1, 1);
    x.channel(0)[0] = 3.0;
    x.channel(1)[0] = cplx{0.0, 4.0};
    EXPECT_EQ(sos_combine(x)(0, 0), cplx(5.0));
}

TEST(Metrics, NormalizedSensitivitiesRecoverMagnitude) {
    const ComplexGrid rho = make_phantom(random_phantom_spec(5, 32, 32));
    SensitivitySpec ss;
    ss.coils = 4;
    ss.seed = 2;
    ss.normalize = true;
    const MultiChannelGrid sens = make_sensitivities(ss, 32, 32);
    const ComplexGrid sos = sos_combine(coil_images(rho, sens));
    for (std::size_t k = 0; k < rho.size(); ++k) EXPECT_NEAR(sos.data()[k].real(), std::abs(rho.data()[k]), 1e-9);
}

TEST(Dataset, WriteReadRoundTrip) {
    const fs::path dir = scratch("ds");
    const DatasetSpec spec = dataset_spec_from_json(small_sim_config());
    write_dataset(dir, spec);
    const LoadedDataset d = read_dataset(dir);
    const auto ref = make_dataset(spec);
    ASSERT_EQ(d.samples.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(d.samples[i].b, ref[i].b);
        EXPECT_EQ(d.samples[i].target, ref[i].target);
        EXPECT_EQ(d.samples[i].mask, ref[i].mask);
    }
    EXPECT_EQ(d.seed, 7u);
    EXPECT_EQ(d.config_hash, config_hash(to_json(spec)));
    EXPECT_EQ(read_cgrid(dir / "images.cgrid").dims, (std::vector<std::uint64_t>{3, 16, 16}));
    EXPECT_EQ(read_cgrid(dir / "sensitivities.cgrid").dims, (std::vector<std::uint64_t>{2, 16, 16}));
    // Writing twice produces identical bytes.
    const fs::path again = scratch("ds2");
    write_dataset(again, spec);
    for (const char* f : {"measurements.cgrid", "kspace.cgrid", "masks.cgrid", "manifest.json"})
        EXPECT_EQ(slurp(dir / f), slurp(again / f)) << f;
}

TEST(Report, FieldsAndMeans) {
    const ReconReport r{"pslr", {10.0, 20.0}, {1.0, 3.0}, "abc", 4};
    const json j = r.to_json();
    EXPECT_EQ(j.at("method"), "pslr");
    EXPECT_EQ(j.at("mean_snr_db").get<double>(), 15.0);
    EXPECT_EQ(j.at("mean_seconds").get<double>(), 2.0);
    EXPECT_EQ(j.at("config_hash"), "abc");
    EXPECT_EQ(j.at("seed").get<int>(), 4);
    EXPECT_EQ(j.at("samples").get<int>(), 2);
    EXPECT_THROW(ReconReport{}.to_json(), ValidationError);
}

TEST(Timing, MedianOfOddAndEven) {
    EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
    int calls = 0;
    EXPECT_GE(time_call([&] { return ++calls; }, [](int) {}), 0.0);
    EXPECT_EQ(calls, 1);
}

TEST(Cli, ExitCodes) {
    const fs::path dir = scratch("cli");
    write_json_file(dir / "sim.json", small_sim_config());
    json bad = small_sim_config();
    bad["colis"] = 3;
    write_json_file(dir / "bad.json", bad);
    EXPECT_EQ(run_cli("simulate --config " + (dir / "sim.json").string() + " --out " + (dir / "ds").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "ds" / "manifest.json"));
    EXPECT_EQ(run_cli("simulate --config " + (dir / "bad.json").string() + " --out " + (dir / "x").string()), 2);
    EXPECT_EQ(run_cli("simulate --config " + (dir / "absent.json").string() + " --out " + (dir / "x").string()), 2);
    EXPECT_EQ(run_cli("simulate --bogus"), 2);
    // eval rejects arrays of different shape.
    write_cgrid(dir / "a.cgrid", to_array(MultiChannelGrid(2, 4, 4)));
    write_cgrid(dir / "b.cgrid", to_array(MultiChannelGrid(2, 4, 5)));
    EXPECT_EQ(run_cli("eval --ref " + (dir / "a.cgrid").string() + " --rec " + (dir / "b.cgrid").string()), 2);
    EXPECT_EQ(run_cli("eval --ref " + (dir / "ds" / "kspace.cgrid").string() + " --rec " +
                      (dir / "ds" / "kspace.cgrid").string() + " --report " + (dir / "r.json").string()),
              0);
    EXPECT_EQ(read_json_file(dir / "r.json").at("mean_snr_db").get<double>(), kSnrClampDb);
}
