#include "spiketest/config.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "spiketest/csv_io.hpp"
#include "spiketest/kv.hpp"

namespace spiketest {

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

Vector resolve_direction(const std::string& label, int m) {
    if (label.size() >= 2 && label[0] == 'e') {
        bool digits = true;
        for (std::size_t i = 1; i < label.size(); ++i)
            if (!std::isdigit(static_cast<unsigned char>(label[i]))) digits = false;
        if (digits) {
            const int idx = std::stoi(label.substr(1));
            if (idx < 1 || idx > m)
                throw InvalidConfigError("direction " + label + " out of range for m=" +
                                         std::to_string(m));
            Vector u = Vector::Zero(m);
            u(idx - 1) = 1.0;
            return u;
        }
    }
    Matrix col = read_matrix_csv(label);
    if (col.cols() != 1 || col.rows() != m)
        throw InvalidConfigError("direction file " + label + " must be a " +
                                 std::to_string(m) + "-vector");
    Vector u = col.col(0);
    const double norm = u.norm();
    if (norm <= 0.0) throw InvalidConfigError("direction file " + label + " is zero");
    return u / norm;
}

void McConfig::validate() const {
    if (m < 2) throw InvalidConfigError("m must be >= 2");
    if (n_x < 1 || n_y < 1) throw InvalidConfigError("n_x, n_y must be >= 1");
    if (n_x < n_y) throw InvalidConfigError("n_x must be >= n_y");
    if (!(rho >= 0.0 && rho < 1.0)) throw InvalidConfigError("rho must be in [0,1)");
    if (!(sigma > 0.0)) throw InvalidConfigError("sigma must be positive");
    if (reps < 1) throw InvalidConfigError("reps must be >= 1");
    if (!(level > 0.0 && level < 1.0)) throw InvalidConfigError("level must be in (0,1)");
    if (k < 1 || k >= m) throw InvalidConfigError("k must be in [1, m)");
    if (scenarios.empty()) throw InvalidConfigError("no scenarios configured");
    if (methods.empty()) throw InvalidConfigError("no methods configured");
}

PerturbationSpec McConfig::perturbation(const ScenarioConfig& sc, bool x_side) const {
    std::vector<PerturbationSpec::Spike> spikes;
    const auto add = [&](const SpikeConfig& s) {
        PerturbationSpec::Spike spike;
        spike.theta = s.theta;
        spike.u = resolve_direction(s.u, m);
        spike.label = s.u;
        spikes.push_back(std::move(spike));
    };
    for (const auto& s : shared_spikes) add(s);
    add(x_side ? sc.spike_x : sc.spike_y);
    return PerturbationSpec(m, std::move(spikes));
}

std::string McConfig::null_canonical_string(const ScenarioConfig& sc) const {
    std::ostringstream s;
    s << "m=" << m << ";n_x=" << n_x << ";n_y=" << n_y << ";rho="
      << format_full_precision(rho) << ";sigma=" << format_full_precision(sigma)
      << ";k=" << k << ";seed=" << seed << ";spikes=";
    for (const auto& sp : shared_spikes)
        s << format_full_precision(sp.theta) << "@" << sp.u << ",";
    s << format_full_precision(sc.spike_x.theta) << "@" << sc.spike_x.u;
    return s.str();
}

std::uint64_t McConfig::null_config_hash(const ScenarioConfig& sc) const {
    return fnv1a64(null_canonical_string(sc));
}

namespace {

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw InvalidConfigError(key + ": cannot parse number '" + value + "'");
    }
}

int to_int(const std::string& key, const std::string& value) {
    const double v = to_double(key, value);
    if (v != std::floor(v))
        throw InvalidConfigError(key + ": expected an integer, got '" + value + "'");
    return static_cast<int>(v);
}

std::vector<Method> parse_methods(const std::string& value) {
    std::vector<Method> methods;
    std::stringstream ss(value);
    std::string token;
    while (std::getline(ss, token, ',')) {
        const std::string name = trim_copy(token);
        if (!name.empty()) methods.push_back(method_from_name(name));
    }
    return methods;
}

}  // namespace

McConfig parse_mc_config(const std::string& path) {
    McConfig cfg;
    std::map<int, SpikeConfig> shared;
    std::map<int, ScenarioConfig> scenarios;

    for (const auto& [key, value] : parse_kv_file(path)) {
        if (key == "m") cfg.m = to_int(key, value);
        else if (key == "n_x") cfg.n_x = to_int(key, value);
        else if (key == "n_y") cfg.n_y = to_int(key, value);
        else if (key == "rho") cfg.rho = to_double(key, value);
        else if (key == "sigma") cfg.sigma = to_double(key, value);
        else if (key == "k") cfg.k = to_int(key, value);
        else if (key == "reps") cfg.reps = to_int(key, value);
        else if (key == "calibration_reps") cfg.calibration_reps = to_int(key, value);
        else if (key == "level") cfg.level = to_double(key, value);
        else if (key == "gap_threshold") cfg.gap_threshold = to_double(key, value);
        else if (key == "seed") cfg.seed = std::stoull(value);
        else if (key == "force") cfg.force = (value == "true" || value == "1");
        else if (key == "methods") cfg.methods = parse_methods(value);
        else if (key.rfind("shared_spike.", 0) == 0) {
            const auto rest = key.substr(13);
            const auto dot = rest.find('.');
            if (dot == std::string::npos) throw InvalidConfigError("bad key: " + key);
            const int idx = to_int(key, rest.substr(0, dot));
            const std::string field = rest.substr(dot + 1);
            if (field == "theta") shared[idx].theta = to_double(key, value);
            else if (field == "u") shared[idx].u = value;
            else throw InvalidConfigError("unknown shared_spike field: " + key);
        } else if (key.rfind("scenario.", 0) == 0) {
            const auto rest = key.substr(9);
            const auto dot = rest.find('.');
            if (dot == std::string::npos) throw InvalidConfigError("bad key: " + key);
            const int idx = to_int(key, rest.substr(0, dot));
            const std::string field = rest.substr(dot + 1);
            ScenarioConfig& sc = scenarios[idx];
            sc.id = idx;
            if (field == "theta_x") sc.spike_x.theta = to_double(key, value);
            else if (field == "u_x") sc.spike_x.u = value;
            else if (field == "theta_y") sc.spike_y.theta = to_double(key, value);
            else if (field == "u_y") sc.spike_y.u = value;
            else throw InvalidConfigError("unknown scenario field: " + key);
        } else {
            throw InvalidConfigError("unknown config key: " + key);
        }
    }

    for (const auto& [idx, s] : shared) cfg.shared_spikes.push_back(s);
    for (const auto& [idx, sc] : scenarios) cfg.scenarios.push_back(sc);
    cfg.validate();
    return cfg;
}

}  // namespace spiketest
