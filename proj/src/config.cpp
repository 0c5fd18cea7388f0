#include "dehazekit/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dhz {

double parse_fraction(const std::string& text) {
    size_t slash = text.find('/');
    size_t pos = 0;
    try {
        if (slash == std::string::npos) {
            double v = std::stod(text, &pos);
            if (pos != text.size()) throw std::invalid_argument("trailing characters");
            return v;
        }
        std::string num = text.substr(0, slash);
        std::string den = text.substr(slash + 1);
        double n = std::stod(num, &pos);
        if (pos != num.size()) throw std::invalid_argument("trailing characters");
        double d = std::stod(den, &pos);
        if (pos != den.size()) throw std::invalid_argument("trailing characters");
        if (d == 0.0) throw std::invalid_argument("zero denominator");
        return n / d;
    } catch (const std::exception&) {
        throw std::invalid_argument("cannot parse number: '" + text + "'");
    }
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

Config::Config() {
    values_ = {
        {"seed", "0"},
        {"out.dir", ""},

        {"synth.count", "16"},
        {"synth.image_size", "64"},
        {"synth.beta_min", "0.5"},
        {"synth.beta_max", "2.0"},
        {"synth.a_min", "0.7"},
        {"synth.a_max", "1.0"},
        {"synth.depth_kind", "mixed"},
        {"synth.depth_scale", "0.65"},

        {"net.embed_dim", "24"},
        {"net.num_blocks", "4"},
        {"net.num_heads", "2"},
        {"net.patch_size", "4"},
        {"net.window_size", "8"},

        {"train.epochs", "15"},
        {"train.batch_size", "8"},
        {"train.learning_rate", "1e-5"},
        {"train.patch_size", "64"},
        {"train.samples_per_epoch", "500"},
        {"train.defense", "none"},
        {"train.lambda", "0.5"},
        {"train.adapter", "none"},
        {"train.adapter_kernel", "3"},
        {"train.sb_per_channel", "false"},
        {"train.attack.epsilon", "1/255"},
        {"train.attack.steps", "5"},
        {"train.attack.step_size", "0"},
        {"train.val_images", "4"},
        {"train.val_attack_steps", "5"},

        {"attack.kind", "linf"},
        {"attack.image_index", "0"},
        {"attack.linf.epsilon", "1/255"},
        {"attack.linf.steps", "10"},
        {"attack.linf.step_size", "0"},
        {"attack.l0.pixels", "1"},
        {"attack.l0.pop_size", "40"},
        {"attack.l0.iterations", "30"},
        {"attack.l0.mutation", "0.5"},
        {"attack.l0.crossover", "0.7"},

        {"gaussian.sigma", "0.01"},
        {"gaussian.variance_reading", "false"},

        {"eval.epsilons", "1/255,4/255"},
        {"eval.pixel_counts", "1,8"},
        {"eval.include_clean", "true"},
        {"eval.include_gaussian", "true"},
        {"eval.include_hazy_baseline", "true"},
        {"eval.max_images", "0"},
    };
}

void Config::require_known(const std::string& key) const {
    if (values_.find(key) == values_.end())
        throw std::invalid_argument("unknown config key: '" + key + "'");
}

void Config::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        require_known(key);
        values_[key] = value;
    }
}

void Config::set(const std::string& key, const std::string& value) {
    require_known(key);
    values_[key] = value;
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

std::string Config::get(const std::string& key) const {
    require_known(key);
    return values_.at(key);
}

int Config::get_int(const std::string& key) const {
    std::string v = get(key);
    try {
        size_t pos = 0;
        int out = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return out;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': not an integer: '" + v + "'");
    }
}

double Config::get_double(const std::string& key) const {
    std::string v = get(key);
    try {
        return parse_fraction(v);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': not a number: '" + v + "'");
    }
}

bool Config::get_bool(const std::string& key) const {
    std::string v = get(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("config key '" + key + "': not a boolean: '" + v + "'");
}

uint64_t Config::get_seed(const std::string& key) const {
    std::string v = get(key);
    try {
        size_t pos = 0;
        unsigned long long out = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return static_cast<uint64_t>(out);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': not a seed: '" + v + "'");
    }
}

std::vector<double> Config::get_list(const std::string& key) const {
    std::string v = get(key);
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(parse_fraction(item));
        } catch (const std::exception&) {
            throw std::invalid_argument("config key '" + key + "': bad list item: '" + item + "'");
        }
    }
    return out;
}

std::vector<int> Config::get_int_list(const std::string& key) const {
    std::vector<int> out;
    for (double v : get_list(key)) {
        int i = static_cast<int>(v);
        if (static_cast<double>(i) != v)
            throw std::invalid_argument("config key '" + key + "': expected integers");
        out.push_back(i);
    }
    return out;
}

std::string Config::render() const {
    std::string out;
    for (const auto& [k, v] : values_) {
        out += k;
        out += " = ";
        out += v;
        out += "\n";
    }
    return out;
}

void Config::write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write config echo: " + path);
    out << render();
}

} // namespace dhz
