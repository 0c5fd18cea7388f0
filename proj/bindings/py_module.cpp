// pybind11 surface over the C++ core. Images cross the boundary as (H, W, 3)
// float64 numpy arrays in [0, 1]; depth maps as (H, W).
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>

#include "dehazekit/adapters.hpp"
#include "dehazekit/attacks.hpp"
#include "dehazekit/evaluate.hpp"
#include "dehazekit/haze.hpp"
#include "dehazekit/metrics.hpp"
#include "dehazekit/net.hpp"
#include "dehazekit/report.hpp"
#include "dehazekit/synth.hpp"
#include "dehazekit/training.hpp"

namespace py = pybind11;
using namespace dhz;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const DoubleArray& arr) {
    std::vector<int> shape(arr.ndim());
    for (py::ssize_t i = 0; i < arr.ndim(); ++i) shape[i] = static_cast<int>(arr.shape(i));
    Tensor t(shape);
    std::copy(arr.data(), arr.data() + arr.size(), t.data.begin());
    return t;
}

Image to_image(const DoubleArray& arr) {
    if (arr.ndim() != 3 || arr.shape(2) != 3)
        throw std::invalid_argument("expected an (H, W, 3) array");
    return to_tensor(arr);
}

DepthMap to_depth(const DoubleArray& arr) {
    if (arr.ndim() != 2) throw std::invalid_argument("expected an (H, W) array");
    return to_tensor(arr);
}

py::array_t<double> from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
    py::array_t<double> arr(shape);
    std::copy(t.data.begin(), t.data.end(), arr.mutable_data());
    return arr;
}

ScatterParams scatter(double beta, const std::array<double, 3>& a) {
    ScatterParams p;
    p.beta = beta;
    p.atmospheric_light = a;
    return p;
}

py::dict attack_dict(const AttackResult& r) {
    py::dict d;
    d["objective"] = r.objective_value;
    d["trace"] = r.trace;
    d["adversarial"] = from_tensor(r.adversarial_input);
    d["delta"] = from_tensor(r.perturbation.delta);
    d["linf_norm"] = r.perturbation.linf_norm();
    d["pixel_count"] = r.perturbation.nonzero_pixel_count();
    py::list pixels;
    for (const PixelTouch& p : r.perturbation.pixels)
        pixels.append(py::make_tuple(p.row, p.col,
                                     py::make_tuple(p.value[0], p.value[1], p.value[2])));
    d["pixels"] = pixels;
    return d;
}

TrainConfig train_config(int epochs, int batch_size, double learning_rate, int patch_size,
                         int samples_per_epoch, const std::string& defense, double lambda,
                         double epsilon, int attack_steps, uint64_t seed) {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = batch_size;
    tc.learning_rate = learning_rate;
    tc.patch_size = patch_size;
    tc.samples_per_epoch = samples_per_epoch;
    tc.defense = defense_from_name(defense);
    tc.lambda = lambda;
    tc.attack_budget.epsilon = epsilon;
    tc.attack_budget.steps = attack_steps;
    tc.seed = seed;
    return tc;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "dehazing toolkit core: synthetic haze, a small dehazing transformer, "
              "adversarial attacks, parameter-efficient robust fine-tuning, evaluation";

    // ---- metrics ----
    m.def("psnr", [](const DoubleArray& a, const DoubleArray& b) {
        return psnr(to_image(a), to_image(b));
    }, py::arg("a"), py::arg("b"));
    m.def("ssim", [](const DoubleArray& a, const DoubleArray& b) {
        return ssim(to_image(a), to_image(b));
    }, py::arg("a"), py::arg("b"));

    // ---- haze model ----
    m.def("transmission", [](const DoubleArray& depth, double beta) {
        return from_tensor(transmission(to_depth(depth), beta));
    }, py::arg("depth"), py::arg("beta"));
    m.def("apply_haze",
          [](const DoubleArray& clean, const DoubleArray& depth, double beta,
             const std::array<double, 3>& a) {
              return from_tensor(apply_haze(to_image(clean), to_depth(depth), scatter(beta, a)));
          },
          py::arg("clean"), py::arg("depth"), py::arg("beta"),
          py::arg("atmospheric_light") = std::array<double, 3>{0.9, 0.9, 0.9});
    m.def("invert_haze",
          [](const DoubleArray& hazy, const DoubleArray& depth, double beta,
             const std::array<double, 3>& a, double t_floor) {
              return from_tensor(
                  invert_haze(to_image(hazy), to_depth(depth), scatter(beta, a), t_floor));
          },
          py::arg("hazy"), py::arg("depth"), py::arg("beta"),
          py::arg("atmospheric_light") = std::array<double, 3>{0.9, 0.9, 0.9},
          py::arg("t_floor") = 1e-6);

    // ---- synthesis ----
    m.def("synth_clean_image", [](int size, uint64_t seed) {
        return from_tensor(synth_clean_image(size, seed));
    }, py::arg("size"), py::arg("seed") = 0);
    m.def("synth_depth", [](const std::string& kind, int h, int w, uint64_t seed, double scale) {
        return from_tensor(synth_depth(depth_kind_from_name(kind), h, w, seed, scale));
    }, py::arg("kind"), py::arg("height"), py::arg("width"), py::arg("seed") = 0,
       py::arg("scale") = 0.65);
    m.def("generate_dataset",
          [](const std::string& out_dir, int count, int image_size, uint64_t seed,
             double beta_min, double beta_max, const std::string& depth_kind) {
              SynthConfig cfg;
              cfg.count = count;
              cfg.image_size = image_size;
              cfg.seed = seed;
              cfg.beta_min = beta_min;
              cfg.beta_max = beta_max;
              cfg.depth_kind = depth_kind_from_name(depth_kind);
              DatasetManifest man = generate_dataset(cfg, out_dir);
              return manifest_hash(man.to_json());
          },
          py::arg("out_dir"), py::arg("count") = 16, py::arg("image_size") = 64,
          py::arg("seed") = 0, py::arg("beta_min") = 0.5, py::arg("beta_max") = 2.0,
          py::arg("depth_kind") = "mixed");

    py::class_<Dataset>(m, "Dataset")
        .def_static("load", [](const std::string& dir) { return load_dataset(dir); },
                    py::arg("dir"))
        .def("__len__", [](const Dataset& d) { return d.size(); })
        .def("hazy", [](const Dataset& d, size_t i) { return from_tensor(d.hazy.at(i)); },
             py::arg("index"))
        .def("clean", [](const Dataset& d, size_t i) { return from_tensor(d.clean.at(i)); },
             py::arg("index"))
        .def("manifest_json", [](const Dataset& d) { return d.manifest.to_json(); })
        .def("hash", [](const Dataset& d) { return manifest_hash(d.manifest.to_json()); });

    // ---- model ----
    py::class_<DehazeNet>(m, "Model")
        .def_static("build",
                    [](int embed_dim, int num_blocks, int num_heads, int patch_size,
                       int window_size, uint64_t seed) {
                        NetConfig nc;
                        nc.embed_dim = embed_dim;
                        nc.num_blocks = num_blocks;
                        nc.num_heads = num_heads;
                        nc.patch_size = patch_size;
                        nc.window_size = window_size;
                        nc.seed = seed;
                        return DehazeNet::build(nc);
                    },
                    py::arg("embed_dim") = 24, py::arg("num_blocks") = 4,
                    py::arg("num_heads") = 2, py::arg("patch_size") = 4,
                    py::arg("window_size") = 8, py::arg("seed") = 0)
        .def_static("load", [](const std::string& path) { return load_checkpoint(path); },
                    py::arg("path"))
        .def("save", [](const DehazeNet& model, const std::string& path) {
            save_checkpoint(model, path);
        }, py::arg("path"))
        .def("forward", [](const DehazeNet& model, const DoubleArray& x) {
            return from_tensor(model.forward(to_image(x)));
        }, py::arg("x"))
        .def("input_gradient", [](const DehazeNet& model, const DoubleArray& x,
                                  const DoubleArray& target) {
            return from_tensor(
                model.input_gradient(to_image(x), l1_distance_objective(to_image(target))));
        }, py::arg("x"), py::arg("target"))
        .def("apply_adapter",
             [](DehazeNet& model, const std::string& method, int kernel_size,
                bool sb_per_channel) {
                 AdapterSpec spec;
                 spec.method = adapter_kind_from_name(method);
                 spec.kernel_size = kernel_size;
                 spec.sb_per_channel = sb_per_channel;
                 apply_adapter(model, spec);
             },
             py::arg("method"), py::arg("kernel_size") = 3, py::arg("sb_per_channel") = false)
        .def("adapter", [](const DehazeNet& model) { return adapter_kind_name(model.adapter()); })
        .def("total_scalars", &DehazeNet::total_scalars)
        .def("trainable_scalars", &DehazeNet::trainable_scalars)
        .def("param_checksum", [](const DehazeNet& model, bool frozen_only) {
            return param_checksum(model, frozen_only);
        }, py::arg("frozen_only") = false)
        .def("registry", [](const DehazeNet& model) {
            py::list rows;
            for (const RegistryEntry& e : model.registry()) {
                py::dict d;
                d["name"] = e.name;
                d["shape"] = e.shape;
                d["trainable"] = e.trainable;
                d["group"] = param_group_name(e.group);
                d["size"] = e.size;
                rows.append(d);
            }
            return rows;
        });

    // ---- attacks ----
    m.def("linf_attack",
          [](const DehazeNet& model, const DoubleArray& x, const DoubleArray& y, double epsilon,
             int steps, double step_size, uint64_t seed) {
              LinfBudget b;
              b.epsilon = epsilon;
              b.steps = steps;
              b.step_size = step_size;
              b.seed = seed;
              return attack_dict(linf_attack(model, to_image(x), to_image(y), b));
          },
          py::arg("model"), py::arg("x"), py::arg("y"), py::arg("epsilon") = 1.0 / 255.0,
          py::arg("steps") = 10, py::arg("step_size") = 0.0, py::arg("seed") = 0);
    m.def("l0_attack",
          [](const DehazeNet& model, const DoubleArray& x, const DoubleArray& y, int pixels,
             int pop_size, int iterations, double mutation, double crossover, uint64_t seed) {
              L0Budget b;
              b.pixels = pixels;
              b.pop_size = pop_size;
              b.iterations = iterations;
              b.mutation = mutation;
              b.crossover = crossover;
              b.seed = seed;
              return attack_dict(l0_attack(model, to_image(x), to_image(y), b));
          },
          py::arg("model"), py::arg("x"), py::arg("y"), py::arg("pixels") = 1,
          py::arg("pop_size") = 40, py::arg("iterations") = 30, py::arg("mutation") = 0.5,
          py::arg("crossover") = 0.7, py::arg("seed") = 0);
    m.def("gaussian_baseline", [](const DoubleArray& x, double sigma, uint64_t seed) {
        return from_tensor(gaussian_baseline(to_image(x), sigma, seed));
    }, py::arg("x"), py::arg("sigma"), py::arg("seed") = 0);

    // ---- training ----
    m.def("finetune",
          [](const DehazeNet& base, const Dataset& data, const std::string& method,
             int kernel_size, bool sb_per_channel, const std::string& defense, int epochs,
             int batch_size, double learning_rate, int patch_size, int samples_per_epoch,
             double lambda, double epsilon, int attack_steps, uint64_t seed,
             const std::string& checkpoint_dir) {
              AdapterSpec spec;
              spec.method = adapter_kind_from_name(method);
              spec.kernel_size = kernel_size;
              spec.sb_per_channel = sb_per_channel;
              TrainConfig tc = train_config(epochs, batch_size, learning_rate, patch_size,
                                            samples_per_epoch, defense, lambda, epsilon,
                                            attack_steps, seed);
              FinetuneResult r = finetune(base, spec, data, tc, checkpoint_dir);
              py::list log;
              for (const EpochStats& e : r.log.epochs) {
                  py::dict d;
                  d["epoch"] = e.epoch;
                  d["base_loss"] = e.base_loss;
                  d["reg_loss"] = e.reg_loss;
                  d["clean_psnr"] = e.clean_psnr;
                  d["adv_psnr"] = e.adv_psnr;
                  log.append(d);
              }
              return py::make_tuple(std::move(r.model), log);
          },
          py::arg("base"), py::arg("dataset"), py::arg("method") = "ll",
          py::arg("kernel_size") = 3, py::arg("sb_per_channel") = false,
          py::arg("defense") = "none", py::arg("epochs") = 5, py::arg("batch_size") = 8,
          py::arg("learning_rate") = 1e-5, py::arg("patch_size") = 64,
          py::arg("samples_per_epoch") = 500, py::arg("lambda_") = 0.5,
          py::arg("epsilon") = 1.0 / 255.0, py::arg("attack_steps") = 5, py::arg("seed") = 0,
          py::arg("checkpoint_dir") = "");

    // ---- evaluation ----
    m.def("evaluate",
          [](const DehazeNet& model, const Dataset& data, const std::string& report_json_path,
             const std::string& model_id, const std::string& method, const std::string& defense,
             double sigma, const std::vector<double>& epsilons,
             const std::vector<int>& pixel_counts, uint64_t seed, int max_images,
             bool include_hazy_baseline) {
              ModelLabel label;
              label.model_id = model_id;
              label.method = method;
              label.defense = defense;
              EvalReport rep =
                  evaluate(model, label, data, default_grid(sigma, epsilons, pixel_counts, seed),
                           max_images);
              if (include_hazy_baseline) rep.rows.push_back(hazy_baseline_row(data, max_images));
              rep.metadata["dataset_hash"] = manifest_hash(data.manifest.to_json());
              rep.metadata["seed"] = std::to_string(seed);
              write_report_json(rep, report_json_path);
              return render_report_table(rep);
          },
          py::arg("model"), py::arg("dataset"), py::arg("report_json_path"),
          py::arg("model_id") = "base", py::arg("method") = "none", py::arg("defense") = "none",
          py::arg("sigma") = 0.01, py::arg("epsilons") = std::vector<double>{1.0 / 255.0},
          py::arg("pixel_counts") = std::vector<int>{1}, py::arg("seed") = 0,
          py::arg("max_images") = 0, py::arg("include_hazy_baseline") = true);
    m.def("render_table", [](const std::string& report_json_path) {
        return render_report_table(load_report_json(report_json_path));
    }, py::arg("report_json_path"));
}
