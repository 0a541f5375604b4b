// pmri: simulate data, run PSLR, train and apply unrolled networks, evaluate and benchmark.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "CLI11.hpp"
#include "pmri.hpp"

namespace fs = std::filesystem;
using namespace pmri;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

// Selects all items, or the single item given by --index.
std::vector<std::size_t> selection(std::size_t n, const std::optional<std::size_t>& index) {
    if (!index) {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), 0);
        return all;
    }
    if (*index >= n) throw ValidationError("--index " + std::to_string(*index) + " out of range (" + std::to_string(n) + " items)");
    return {*index};
}

int cmd_simulate(const fs::path& config, const fs::path& out) {
    const DatasetSpec spec = dataset_spec_from_json(read_json_file(config));
    write_dataset(out, spec);
    std::cout << "wrote " << spec.count << " items to " << out.string() << "\n";
    return 0;
}

int cmd_pslr(const fs::path& data, const fs::path& config, const fs::path& out, const fs::path& report,
             const std::optional<std::size_t>& index) {
    const json cj = config.empty() ? json::object() : read_json_file(config);
    const PslrConfig cfg = pslr_config_from_json(cj);
    const LoadedDataset ds = read_dataset(data);
    ReconReport rep{"pslr", {}, {}, config_hash(to_json(cfg)), ds.seed};
    json traces = json::array();
    std::vector<CgridArray> recs;
    for (std::size_t i : selection(ds.samples.size(), index)) {
        const Sample& s = ds.samples[i];
        PslrResult r = pslr_reconstruct(s.b, s.mask, cfg);
        rep.snr_db.push_back(kspace_snr_db(s.target, r.x));
        rep.seconds.push_back(r.trace.seconds);
        traces.push_back(to_json(r.trace));
        recs.push_back(to_array(r.x));
        std::cout << "item " << i << ": " << rep.snr_db.back() << " dB, " << r.trace.iterations.size()
                  << " iterations, " << r.trace.seconds << " s\n";
    }
    write_cgrid(out, stack(recs));
    if (!report.empty()) {
        json j = rep.to_json();
        j["config"] = to_json(cfg);
        j["dataset_hash"] = ds.config_hash;
        j["traces"] = traces;
        write_json_file(report, j);
    }
    return 0;
}

int cmd_train(const fs::path& dataset, const std::string& arch, const fs::path& config, const fs::path& out) {
    const json cj = config.empty() ? json::object() : read_json_file(config);
    const TrainConfig cfg = train_config_from_json(cj);
    const LoadedDataset ds = read_dataset(dataset);
    const Architecture a = arch == "hybrid" ? Architecture::Hybrid : Architecture::KSpace;
    TrainResult res = train(ds.samples, cfg, a, [](const EpochLog& e) {
        std::cout << "epoch " << e.epoch << "  train " << e.train_loss << "  val " << e.validation_loss << "  beta_k "
                  << e.beta_k << "  (" << e.seconds << " s)\n";
    });
    const json tc = to_json(cfg);
    save_checkpoint(out, res.params, tc, cfg.seed);
    write_json_file(out / "train_log.json",
                    {{"architecture", arch}, {"config", tc}, {"config_hash", config_hash(tc)},
                     {"dataset_hash", ds.config_hash}, {"epochs", to_json(res.log)}});
    return 0;
}

int cmd_recon(const fs::path& data, const fs::path& model, const fs::path& out, const fs::path& report,
              const std::optional<std::size_t>& index) {
    const NetParams p = load_checkpoint(model);
    const LoadedDataset ds = read_dataset(data);
    const json manifest = read_json_file(model / "manifest.json");
    ReconReport rep{p.hybrid() ? "hybrid-net" : "kspace-net", {}, {}, manifest.value("train_config_hash", ""), ds.seed};
    std::vector<CgridArray> recs;
    for (std::size_t i : selection(ds.samples.size(), index)) {
        const Sample& s = ds.samples[i];
        MultiChannelGrid x;
        rep.seconds.push_back(time_call([&] { return forward_net(s.b, s.mask, p); }, [&](MultiChannelGrid v) { x = std::move(v); }));
        if (!all_finite(x.data())) throw NumericalError("recon: non-finite output for item " + std::to_string(i));
        rep.snr_db.push_back(kspace_snr_db(s.target, x));
        recs.push_back(to_array(x));
    }
    write_cgrid(out, stack(recs));
    std::cout << rep.method << ": mean " << ReconReport::mean(rep.snr_db) << " dB over " << recs.size() << " items\n";
    if (!report.empty()) write_json_file(report, rep.to_json());
    return 0;
}

int cmd_eval(const fs::path& ref, const fs::path& rec, const fs::path& report, const std::string& domain) {
    const CgridArray a = read_cgrid(ref);
    const CgridArray b = read_cgrid(rec);
    if (a.dims != b.dims) throw DimensionError("eval: " + ref.string() + " and " + rec.string() + " differ in shape");
    ReconReport rep{"eval", {}, {}, "", 0};
    if (domain == "kspace") {
        for (std::size_t i = 0; i < item_count(a, 3); ++i)
            rep.snr_db.push_back(kspace_snr_db(multichannel_item(a, i), multichannel_item(b, i)));
    } else {
        for (std::size_t i = 0; i < item_count(a, 2); ++i) rep.snr_db.push_back(snr_db(grid_item(a, i), grid_item(b, i)));
    }
    json j = rep.to_json();
    j["domain"] = domain;
    j["config_hash"] = config_hash({{"ref", ref.string()}, {"rec", rec.string()}, {"domain", domain}});
    std::cout << "mean SNR " << j["mean_snr_db"].get<double>() << " dB over " << rep.snr_db.size() << " items\n";
    if (!report.empty()) write_json_file(report, j);
    return 0;
}

int cmd_bench(const fs::path& data, const fs::path& model, const fs::path& pslr_config, const fs::path& report,
              std::size_t count, std::size_t repeats) {
    const json cj = pslr_config.empty() ? json::object() : read_json_file(pslr_config);
    PslrConfig cfg = pslr_config_from_json(cj);
    cfg.record_cost = false;
    const NetParams p = load_checkpoint(model);
    const LoadedDataset ds = read_dataset(data);
    if (repeats == 0) throw ValidationError("bench: --repeats must be >= 1");
    count = std::min(count, ds.samples.size());
    if (count == 0) throw ValidationError("bench: --count must be >= 1");

    json items = json::array();
    ReconReport net_rep{p.hybrid() ? "hybrid-net" : "kspace-net", {}, {}, config_hash(read_json_file(model / "manifest.json").value("train_config", json::object())), ds.seed};
    ReconReport pslr_rep{"pslr", {}, {}, config_hash(to_json(cfg)), ds.seed};
    ReconReport zf_rep{"zero-filled", {}, {}, "", ds.seed};
    for (std::size_t i = 0; i < count; ++i) {
        const Sample& s = ds.samples[i];
        std::vector<double> t_net, t_pslr;
        MultiChannelGrid x_net, x_pslr;
        for (std::size_t r = 0; r < repeats; ++r) {
            t_pslr.push_back(time_call([&] { return pslr_reconstruct(s.b, s.mask, cfg).x; },
                                       [&](MultiChannelGrid v) { x_pslr = std::move(v); }));
            t_net.push_back(time_call([&] { return forward_net(s.b, s.mask, p); }, [&](MultiChannelGrid v) { x_net = std::move(v); }));
        }
        net_rep.snr_db.push_back(kspace_snr_db(s.target, x_net));
        net_rep.seconds.push_back(median(t_net));
        pslr_rep.snr_db.push_back(kspace_snr_db(s.target, x_pslr));
        pslr_rep.seconds.push_back(median(t_pslr));
        zf_rep.snr_db.push_back(kspace_snr_db(s.target, s.b));
        items.push_back({{"item", i}, {"net_seconds", t_net}, {"pslr_seconds", t_pslr}});
        std::cout << "item " << i << ": net " << net_rep.snr_db.back() << " dB " << net_rep.seconds.back() << " s | pslr "
                  << pslr_rep.snr_db.back() << " dB " << pslr_rep.seconds.back() << " s | zero-filled "
                  << zf_rep.snr_db.back() << " dB\n";
    }
    const double ratio = ReconReport::mean(pslr_rep.seconds) / ReconReport::mean(net_rep.seconds);
    std::cout << "speedup " << ratio << "x\n";
    if (!report.empty()) {
        json zf = zf_rep.to_json();
        write_json_file(report, {{"network", net_rep.to_json()},
                                 {"pslr", pslr_rep.to_json()},
                                 {"zero_filled", zf},
                                 {"repeats", repeats},
                                 {"runs", items},
                                 {"speedup", ratio},
                                 {"dataset_hash", ds.config_hash}});
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* t = std::getenv("PMRI_THREADS")) Eigen::setNbThreads(std::max(1, std::atoi(t)));

    CLI::App app{"Calibrationless parallel MRI reconstruction"};
    app.require_subcommand(1);

    fs::path config, out, data, report, model, ref, rec, pslr_cfg;
    std::string arch = "kspace", domain = "kspace";
    std::optional<std::size_t> index;
    std::size_t count = 1, repeats = 3;

    auto* sim = app.add_subcommand("simulate", "Generate a synthetic multi-coil dataset");
    sim->add_option("--config", config, "sim.json")->required();
    sim->add_option("--out", out, "Output directory")->required();

    auto* pslr = app.add_subcommand("pslr", "Structured low-rank IRLS reconstruction");
    pslr->add_option("--data", data, "Dataset directory")->required();
    pslr->add_option("--config", config, "pslr.json");
    pslr->add_option("--out", out, "Reconstructed k-space (cgrid)")->required();
    pslr->add_option("--report", report, "JSON report");
    pslr->add_option("--index", index, "Reconstruct one item only");

    auto* tr = app.add_subcommand("train", "Train an unrolled network");
    tr->add_option("--dataset", data, "Dataset directory")->required();
    tr->add_option("--arch", arch, "kspace or hybrid")->check(CLI::IsMember({"kspace", "hybrid"}));
    tr->add_option("--config", config, "train.json");
    tr->add_option("--out", out, "Checkpoint directory")->required();

    auto* rc = app.add_subcommand("recon", "Network inference");
    rc->add_option("--data", data, "Dataset directory")->required();
    rc->add_option("--model", model, "Checkpoint directory")->required();
    rc->add_option("--out", out, "Reconstructed k-space (cgrid)")->required();
    rc->add_option("--report", report, "JSON report");
    rc->add_option("--index", index, "Reconstruct one item only");

    auto* ev = app.add_subcommand("eval", "SNR of a reconstruction against a reference");
    ev->add_option("--ref", ref, "Reference cgrid")->required();
    ev->add_option("--rec", rec, "Reconstruction cgrid")->required();
    ev->add_option("--report", report, "JSON report");
    ev->add_option("--domain", domain, "kspace (SOS of coil k-space) or image")->check(CLI::IsMember({"kspace", "image"}));

    auto* bn = app.add_subcommand("bench", "Network vs. PSLR on identical inputs");
    bn->add_option("--data", data, "Dataset directory")->required();
    bn->add_option("--model", model, "Checkpoint directory")->required();
    bn->add_option("--pslr", pslr_cfg, "pslr.json");
    bn->add_option("--report", report, "JSON report");
    bn->add_option("--count", count, "Items to benchmark");
    bn->add_option("--repeats", repeats, "Timed runs per method (median reported)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc_parse = app.exit(e);
        return rc_parse == 0 ? 0 : kExitValidation;
    }

    try {
        if (*sim) return cmd_simulate(config, out);
        if (*pslr) return cmd_pslr(data, config, out, report, index);
        if (*tr) return cmd_train(data, arch, config, out);
        if (*rc) return cmd_recon(data, model, out, report, index);
        if (*ev) return cmd_eval(ref, rec, report, domain);
        if (*bn) return cmd_bench(data, model, pslr_cfg, report, count, repeats);
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    }
    return 0;
}
