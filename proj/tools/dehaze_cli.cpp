#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dehazekit/adapters.hpp"
#include "dehazekit/attacks.hpp"
#include "dehazekit/config.hpp"
#include "dehazekit/evaluate.hpp"
#include "dehazekit/metrics.hpp"
#include "dehazekit/net.hpp"
#include "dehazekit/png_io.hpp"
#include "dehazekit/report.hpp"
#include "dehazekit/synth.hpp"
#include "dehazekit/training.hpp"

namespace fs = std::filesystem;
using namespace dhz;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string out_root() {
    const char* env = std::getenv("DEHAZEKIT_OUT_ROOT");
    return env && env[0] ? env : "runs";
}

struct Common {
    std::string config_path;
    std::string out_dir;
    std::string seed;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config_path, "dotted-key config file");
    sub->add_option("--out-dir", c.out_dir, "run output directory");
    sub->add_option("--seed", c.seed, "master seed");
}

// defaults < config file < flags; flags are staged by the caller.
Config resolve(const Common& c, const std::vector<std::pair<std::string, std::string>>& flags) {
    Config cfg;
    if (!c.config_path.empty()) cfg.load_file(c.config_path);
    if (!c.seed.empty()) cfg.set("seed", c.seed);
    for (const auto& [k, v] : flags) cfg.set(k, v);
    return cfg;
}

fs::path run_dir(const Common& c, const Config& cfg, const std::string& name) {
    if (!c.out_dir.empty()) return c.out_dir;
    std::string configured = cfg.get("out.dir");
    if (!configured.empty()) return configured;
    return fs::path(out_root()) / name;
}

SynthConfig synth_config(const Config& cfg) {
    SynthConfig s;
    s.count = cfg.get_int("synth.count");
    s.image_size = cfg.get_int("synth.image_size");
    s.beta_min = cfg.get_double("synth.beta_min");
    s.beta_max = cfg.get_double("synth.beta_max");
    s.a_min = cfg.get_double("synth.a_min");
    s.a_max = cfg.get_double("synth.a_max");
    s.depth_kind = depth_kind_from_name(cfg.get("synth.depth_kind"));
    s.depth_scale = cfg.get_double("synth.depth_scale");
    s.seed = cfg.get_seed("seed");
    return s;
}

NetConfig net_config(const Config& cfg) {
    NetConfig n;
    n.embed_dim = cfg.get_int("net.embed_dim");
    n.num_blocks = cfg.get_int("net.num_blocks");
    n.num_heads = cfg.get_int("net.num_heads");
    n.patch_size = cfg.get_int("net.patch_size");
    n.window_size = cfg.get_int("net.window_size");
    n.seed = cfg.get_seed("seed");
    return n;
}

TrainConfig train_config(const Config& cfg) {
    TrainConfig t;
    t.epochs = cfg.get_int("train.epochs");
    t.batch_size = cfg.get_int("train.batch_size");
    t.learning_rate = cfg.get_double("train.learning_rate");
    t.patch_size = cfg.get_int("train.patch_size");
    t.samples_per_epoch = cfg.get_int("train.samples_per_epoch");
    t.defense = defense_from_name(cfg.get("train.defense"));
    t.lambda = cfg.get_double("train.lambda");
    t.attack_budget.epsilon = cfg.get_double("train.attack.epsilon");
    t.attack_budget.steps = cfg.get_int("train.attack.steps");
    t.attack_budget.step_size = cfg.get_double("train.attack.step_size");
    t.seed = cfg.get_seed("seed");
    t.val_images = cfg.get_int("train.val_images");
    t.val_attack_steps = cfg.get_int("train.val_attack_steps");
    return t;
}

AdapterSpec adapter_spec(const Config& cfg) {
    AdapterSpec spec;
    spec.method = adapter_kind_from_name(cfg.get("train.adapter"));
    spec.kernel_size = cfg.get_int("train.adapter_kernel");
    spec.sb_per_channel = cfg.get_bool("train.sb_per_channel");
    return spec;
}

double resolved_sigma(const Config& cfg) {
    double s = cfg.get_double("gaussian.sigma");
    if (s < 0.0) throw std::invalid_argument("gaussian.sigma must be nonnegative");
    return cfg.get_bool("gaussian.variance_reading") ? std::sqrt(s) : s;
}

DehazeNet load_model(const Config& cfg, const std::string& checkpoint) {
    if (checkpoint.empty()) return DehazeNet::build(net_config(cfg));
    return load_checkpoint(checkpoint);
}

ModelLabel model_label(const DehazeNet& model, const std::string& checkpoint) {
    ModelLabel label;
    if (!checkpoint.empty()) {
        label.model_id = fs::path(checkpoint).stem().string();
        auto meta = checkpoint_meta(checkpoint);
        if (meta.count("defense")) label.defense = meta.at("defense");
    }
    label.method = adapter_kind_name(model.adapter());
    return label;
}

int cmd_synthesize(const Common& common,
                   const std::vector<std::pair<std::string, std::string>>& flags) {
    Config cfg = resolve(common, flags);
    fs::path dir = run_dir(common, cfg, "dataset");
    fs::create_directories(dir);
    DatasetManifest manifest = generate_dataset(synth_config(cfg), dir.string());
    cfg.write((dir / "config.txt").string());
    std::string hash = manifest_hash(manifest.to_json());
    std::printf("synthesized %zu pairs in %s (manifest %s)\n", manifest.pairs.size(),
                dir.string().c_str(), hash.c_str());
    return 0;
}

int run_training(const Common& common,
                 const std::vector<std::pair<std::string, std::string>>& flags,
                 const std::string& dataset_dir, const std::string& checkpoint,
                 const std::string& name, bool is_finetune) {
    Config cfg = resolve(common, flags);
    if (dataset_dir.empty()) throw std::invalid_argument("--dataset is required");
    if (is_finetune && checkpoint.empty())
        throw std::invalid_argument("--checkpoint (base model) is required for finetune");
    fs::path dir = run_dir(common, cfg, name);
    fs::create_directories(dir);
    cfg.write((dir / "config.txt").string());

    Dataset data = load_dataset(dataset_dir);
    DehazeNet base = load_model(cfg, checkpoint);
    AdapterSpec spec = is_finetune ? adapter_spec(cfg) : AdapterSpec{AdapterKind::None, 3, false};
    TrainConfig tcfg = train_config(cfg);
    if (!is_finetune && checkpoint.empty() && tcfg.defense != Defense::None)
        std::fprintf(stderr, "note: training a fresh model with defense=%s\n",
                     defense_name(tcfg.defense).c_str());

    FinetuneResult result = finetune(base, spec, data, tcfg, dir.string(), checkpoint);
    if (result.log.epochs.empty()) {
        std::printf("%s: 0 epochs, model unchanged\n", name.c_str());
        return 0;
    }
    const EpochStats& last = result.log.epochs.back();
    std::printf("%s: %zu epochs done, base_loss %.5f, clean %.2f dB, attacked %.2f dB -> %s\n",
                name.c_str(), result.log.epochs.size(), last.base_loss, last.clean_psnr,
                last.adv_psnr, dir.string().c_str());
    return 0;
}

int cmd_attack(const Common& common,
               const std::vector<std::pair<std::string, std::string>>& flags,
               const std::string& dataset_dir, const std::string& checkpoint) {
    Config cfg = resolve(common, flags);
    if (dataset_dir.empty()) throw std::invalid_argument("--dataset is required");
    fs::path dir = run_dir(common, cfg, "attack");
    fs::create_directories(dir);
    cfg.write((dir / "config.txt").string());

    Dataset data = load_dataset(dataset_dir);
    int index = cfg.get_int("attack.image_index");
    if (index < 0 || index >= static_cast<int>(data.size()))
        throw std::invalid_argument("attack.image_index out of range");
    DehazeNet model = load_model(cfg, checkpoint);
    const Image& hazy = data.hazy[static_cast<size_t>(index)];
    const Image& clean = data.clean[static_cast<size_t>(index)];
    uint64_t seed = cfg.get_seed("seed");

    std::string kind = cfg.get("attack.kind");
    json record;
    record["format"] = "dehazekit-attack-v1";
    record["kind"] = kind;
    record["image_index"] = index;
    record["seed"] = seed;
    record["model"] = checkpoint.empty() ? "base" : checkpoint;

    Image adversarial;
    if (kind == "linf") {
        LinfBudget b;
        b.epsilon = cfg.get_double("attack.linf.epsilon");
        b.steps = cfg.get_int("attack.linf.steps");
        b.step_size = cfg.get_double("attack.linf.step_size");
        b.seed = seed;
        AttackResult r = linf_attack(model, hazy, clean, b);
        adversarial = r.adversarial_input;
        record["budget"] = {{"epsilon", b.epsilon}, {"steps", b.steps},
                            {"step_size", b.resolved_step()}};
        record["objective_value"] = r.objective_value;
        record["trace"] = r.trace;
        record["linf_norm"] = r.perturbation.linf_norm();
    } else if (kind == "l0") {
        L0Budget b;
        b.pixels = cfg.get_int("attack.l0.pixels");
        b.pop_size = cfg.get_int("attack.l0.pop_size");
        b.iterations = cfg.get_int("attack.l0.iterations");
        b.mutation = cfg.get_double("attack.l0.mutation");
        b.crossover = cfg.get_double("attack.l0.crossover");
        b.seed = seed;
        AttackResult r = l0_attack(model, hazy, clean, b);
        adversarial = r.adversarial_input;
        record["budget"] = {{"pixels", b.pixels}, {"pop_size", b.pop_size},
                            {"iterations", b.iterations}, {"mutation", b.mutation},
                            {"crossover", b.crossover}};
        record["objective_value"] = r.objective_value;
        record["trace"] = r.trace;
        json px = json::array();
        for (const auto& t : r.perturbation.pixels)
            px.push_back({{"row", t.row}, {"col", t.col},
                          {"rgb", {t.value[0], t.value[1], t.value[2]}}});
        record["pixels"] = px;
    } else if (kind == "gaussian") {
        double sigma = resolved_sigma(cfg);
        adversarial = gaussian_baseline(hazy, sigma, seed);
        record["budget"] = {{"sigma", sigma},
                            {"variance_reading", cfg.get_bool("gaussian.variance_reading")}};
        InputObjective obj = l1_distance_objective(clean);
        record["objective_value"] = obj.value(model.forward(adversarial));
    } else {
        throw std::invalid_argument("attack.kind must be linf, l0 or gaussian");
    }

    Image pred_clean = model.forward(hazy);
    Image pred_adv = model.forward(adversarial);
    record["psnr_clean_input"] = psnr(pred_clean, clean);
    record["psnr_attacked_input"] = psnr(pred_adv, clean);

    save_image(adversarial, (dir / "adversarial.png").string());
    save_image(pred_adv, (dir / "prediction_attacked.png").string());
    save_image(pred_clean, (dir / "prediction_clean.png").string());
    std::ofstream out(dir / "attack.json", std::ios::binary);
    out << record.dump(1) << "\n";
    std::printf("attack %s on image %d: objective %.4f, psnr %.2f -> %.2f dB, outputs in %s\n",
                kind.c_str(), index, record["objective_value"].get<double>(),
                record["psnr_clean_input"].get<double>(),
                record["psnr_attacked_input"].get<double>(), dir.string().c_str());
    return 0;
}

int cmd_evaluate(const Common& common,
                 const std::vector<std::pair<std::string, std::string>>& flags,
                 const std::string& dataset_dir, const std::string& checkpoint) {
    Config cfg = resolve(common, flags);
    if (dataset_dir.empty()) throw std::invalid_argument("--dataset is required");
    fs::path dir = run_dir(common, cfg, "evaluate");
    fs::create_directories(dir);
    cfg.write((dir / "config.txt").string());

    Dataset data = load_dataset(dataset_dir);
    DehazeNet model = load_model(cfg, checkpoint);
    uint64_t seed = cfg.get_seed("seed");
    double sigma = resolved_sigma(cfg);

    std::vector<EvalCondition> grid;
    std::vector<double> epsilons = cfg.get_list("eval.epsilons");
    std::vector<int> pixels = cfg.get_int_list("eval.pixel_counts");
    for (auto& c : default_grid(sigma, epsilons, pixels, seed)) {
        if (c.kind == CondKind::Clean && !cfg.get_bool("eval.include_clean")) continue;
        if (c.kind == CondKind::Gaussian && !cfg.get_bool("eval.include_gaussian")) continue;
        if (c.kind == CondKind::Linf) {
            c.linf.steps = cfg.get_int("attack.linf.steps");
            c.linf.step_size = cfg.get_double("attack.linf.step_size");
        }
        if (c.kind == CondKind::L0) {
            c.l0.pop_size = cfg.get_int("attack.l0.pop_size");
            c.l0.iterations = cfg.get_int("attack.l0.iterations");
            c.l0.mutation = cfg.get_double("attack.l0.mutation");
            c.l0.crossover = cfg.get_double("attack.l0.crossover");
        }
        grid.push_back(c);
    }

    int max_images = cfg.get_int("eval.max_images");
    EvalReport report = evaluate(model, model_label(model, checkpoint), data, grid, max_images);
    if (cfg.get_bool("eval.include_hazy_baseline"))
        report.rows.push_back(hazy_baseline_row(data, max_images));

    report.metadata["dataset_hash"] = manifest_hash(data.manifest.to_json());
    report.metadata["toolkit_version"] = kVersion;
    report.metadata["seed"] = std::to_string(seed);
    report.metadata["sigma"] = std::to_string(sigma);
    report.metadata["sigma_reading"] =
        cfg.get_bool("gaussian.variance_reading") ? "variance" : "std";
    report.metadata["checkpoint"] = checkpoint.empty() ? "base" : checkpoint;

    write_report_json(report, (dir / "report.json").string());
    write_report_csv(report, (dir / "report.csv").string());
    write_report_txt(report, (dir / "report.txt").string());
    std::printf("%s", render_report_table(report).c_str());
    std::printf("report written to %s\n", dir.string().c_str());
    return 0;
}

int cmd_report(const Common& common, const std::string& input, bool plot) {
    Config cfg;
    if (!common.config_path.empty()) cfg.load_file(common.config_path);
    fs::path dir = common.out_dir.empty() ? fs::path(input).parent_path()
                                          : fs::path(common.out_dir);
    if (dir.empty()) dir = ".";
    fs::create_directories(dir);
    EvalReport report = load_report_json(input);
    write_report_txt(report, (dir / "report.txt").string());
    if (plot) write_report_svg(report, (dir / "plot.svg").string());
    std::printf("%s", render_report_table(report).c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dehazekit: synthetic-haze restoration, adversarial attacks and robust "
                 "fine-tuning at desk scale"};
    app.require_subcommand(1);

    // synthesize ------------------------------------------------------------
    Common c_syn;
    std::string syn_count, syn_size;
    auto* syn = app.add_subcommand("synthesize", "generate a synthetic hazy/clean dataset");
    add_common(syn, c_syn);
    syn->add_option("--count", syn_count, "number of image pairs");
    syn->add_option("--image-size", syn_size, "square image side");

    // train -------------------------------------------------------------------
    Common c_train;
    std::string train_dataset, train_ckpt, train_epochs, train_lr, train_defense;
    auto* train = app.add_subcommand("train", "pretrain the base model (clean by default)");
    add_common(train, c_train);
    train->add_option("--dataset", train_dataset, "dataset directory")->required();
    train->add_option("--checkpoint", train_ckpt, "resume from checkpoint");
    train->add_option("--epochs", train_epochs, "training epochs");
    train->add_option("--lr", train_lr, "learning rate");
    train->add_option("--defense", train_defense, "none|at|trades");

    // finetune ----------------------------------------------------------------
    Common c_ft;
    std::string ft_dataset, ft_ckpt, ft_adapter, ft_defense, ft_lambda, ft_eps, ft_steps,
        ft_epochs, ft_lr;
    auto* ft = app.add_subcommand("finetune", "adapter + defense fine-tuning from a base model");
    add_common(ft, c_ft);
    ft->add_option("--dataset", ft_dataset, "dataset directory")->required();
    ft->add_option("--checkpoint", ft_ckpt, "base model checkpoint")->required();
    ft->add_option("--adapter", ft_adapter, "ll|sb|linead");
    ft->add_option("--defense", ft_defense, "none|at|trades");
    ft->add_option("--lambda", ft_lambda, "TRADES weight");
    ft->add_option("--epsilon", ft_eps, "training attack epsilon (accepts 1/255)");
    ft->add_option("--steps", ft_steps, "training attack steps");
    ft->add_option("--epochs", ft_epochs, "fine-tuning epochs");
    ft->add_option("--lr", ft_lr, "learning rate");

    // attack --------------------------------------------------------------------
    Common c_atk;
    std::string atk_dataset, atk_ckpt, atk_kind, atk_eps, atk_pixels, atk_sigma, atk_steps,
        atk_image;
    auto* atk = app.add_subcommand("attack", "attack one image and dump PNG/JSON outputs");
    add_common(atk, c_atk);
    atk->add_option("--dataset", atk_dataset, "dataset directory")->required();
    atk->add_option("--checkpoint", atk_ckpt, "model checkpoint");
    atk->add_option("--kind", atk_kind, "linf|l0|gaussian");
    atk->add_option("--epsilon", atk_eps, "linf epsilon (accepts 1/255)");
    atk->add_option("--pixels", atk_pixels, "l0 pixel budget");
    atk->add_option("--sigma", atk_sigma, "gaussian sigma");
    atk->add_option("--steps", atk_steps, "linf steps");
    atk->add_option("--image", atk_image, "image index");

    // evaluate ---------------------------------------------------------------
    Common c_eval;
    std::string ev_dataset, ev_ckpt, ev_eps, ev_pixels, ev_sigma, ev_max, ev_steps;
    auto* ev = app.add_subcommand("evaluate", "grid evaluation into report.{json,csv,txt}");
    add_common(ev, c_eval);
    ev->add_option("--dataset", ev_dataset, "dataset directory")->required();
    ev->add_option("--checkpoint", ev_ckpt, "model checkpoint");
    ev->add_option("--epsilon", ev_eps, "comma list of linf epsilons");
    ev->add_option("--pixels", ev_pixels, "comma list of l0 pixel budgets");
    ev->add_option("--sigma", ev_sigma, "gaussian sigma");
    ev->add_option("--steps", ev_steps, "linf steps");
    ev->add_option("--max-images", ev_max, "cap on evaluated images (0 = all)");

    // report -----------------------------------------------------------------
    Common c_rep;
    std::string rep_input;
    bool rep_plot = false;
    auto* rep = app.add_subcommand("report", "render a report.json into a text table");
    add_common(rep, c_rep);
    rep->add_option("--input", rep_input, "report.json path")->required();
    rep->add_flag("--plot", rep_plot, "also write metric-vs-budget plot.svg");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    }

    try {
        auto staged = [](std::initializer_list<std::pair<std::string, std::string>> pairs) {
            std::vector<std::pair<std::string, std::string>> out;
            for (const auto& [k, v] : pairs)
                if (!v.empty()) out.push_back({k, v});
            return out;
        };
        if (syn->parsed())
            return cmd_synthesize(c_syn, staged({{"synth.count", syn_count},
                                                 {"synth.image_size", syn_size}}));
        if (train->parsed())
            return run_training(c_train,
                                staged({{"train.epochs", train_epochs},
                                        {"train.learning_rate", train_lr},
                                        {"train.defense", train_defense}}),
                                train_dataset, train_ckpt, "train", false);
        if (ft->parsed())
            return run_training(c_ft,
                                staged({{"train.adapter", ft_adapter},
                                        {"train.defense", ft_defense},
                                        {"train.lambda", ft_lambda},
                                        {"train.attack.epsilon", ft_eps},
                                        {"train.attack.steps", ft_steps},
                                        {"train.epochs", ft_epochs},
                                        {"train.learning_rate", ft_lr}}),
                                ft_dataset, ft_ckpt, "finetune", true);
        if (atk->parsed())
            return cmd_attack(c_atk,
                              staged({{"attack.kind", atk_kind},
                                      {"attack.linf.epsilon", atk_eps},
                                      {"attack.l0.pixels", atk_pixels},
                                      {"gaussian.sigma", atk_sigma},
                                      {"attack.linf.steps", atk_steps},
                                      {"attack.image_index", atk_image}}),
                              atk_dataset, atk_ckpt);
        if (ev->parsed())
            return cmd_evaluate(c_eval,
                                staged({{"eval.epsilons", ev_eps},
                                        {"eval.pixel_counts", ev_pixels},
                                        {"gaussian.sigma", ev_sigma},
                                        {"attack.linf.steps", ev_steps},
                                        {"eval.max_images", ev_max}}),
                                ev_dataset, ev_ckpt);
        if (rep->parsed()) return cmd_report(c_rep, rep_input, rep_plot);
        std::fprintf(stderr, "usage error: no subcommand\n");
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
