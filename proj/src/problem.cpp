#include "bmmp/problem.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "bmmp/rng.hpp"

namespace bmmp {

namespace {

// Sub-stream tags for the one instance seed.
constexpr std::uint64_t kTagMatrix = 1;
constexpr std::uint64_t kTagSignal = 2;
constexpr std::uint64_t kTagNoise = 3;

constexpr char kB64Chars[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::vector<double>& values) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(values.data());
    const std::size_t len = values.size() * sizeof(double);
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (std::size_t i = 0; i < len; i += 3) {
        std::uint32_t chunk = static_cast<std::uint32_t>(bytes[i]) << 16;
        if (i + 1 < len) chunk |= static_cast<std::uint32_t>(bytes[i + 1]) << 8;
        if (i + 2 < len) chunk |= bytes[i + 2];
        out.push_back(kB64Chars[(chunk >> 18) & 63]);
        out.push_back(kB64Chars[(chunk >> 12) & 63]);
        out.push_back(i + 1 < len ? kB64Chars[(chunk >> 6) & 63] : '=');
        out.push_back(i + 2 < len ? kB64Chars[chunk & 63] : '=');
    }
    return out;
}

std::vector<double> base64_decode(const std::string& text, std::size_t expected_count) {
    static int lut[256];
    static bool lut_ready = false;
    if (!lut_ready) {
        for (int& v : lut) v = -1;
        for (int i = 0; i < 64; ++i) lut[static_cast<unsigned char>(kB64Chars[i])] = i;
        lut_ready = true;
    }
    std::vector<unsigned char> bytes;
    bytes.reserve(text.size() / 4 * 3);
    std::uint32_t chunk = 0;
    int bits = 0;
    for (char c : text) {
        if (c == '=') break;
        const int v = lut[static_cast<unsigned char>(c)];
        if (v < 0)
            throw std::runtime_error("base64: invalid character");
        chunk = (chunk << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            bytes.push_back(static_cast<unsigned char>((chunk >> bits) & 0xff));
        }
    }
    if (bytes.size() != expected_count * sizeof(double))
        throw std::runtime_error("base64: payload size mismatch");
    std::vector<double> values(expected_count);
    std::memcpy(values.data(), bytes.data(), bytes.size());
    return values;
}

}  // namespace

Matrix gen_matrix(const SensingModel& model, std::uint64_t seed) {
    if (model.m < 1 || model.n < 1 || model.sigma <= 0.0)
        throw std::invalid_argument("gen_matrix: invalid model");
    Rng rng(seed);
    Matrix phi(model.m, model.n);
    for (int j = 0; j < model.n; ++j)
        for (int i = 0; i < model.m; ++i)
            phi(i, j) = model.sigma * rng.next_gaussian();
    return phi;
}

std::pair<Vector, std::vector<int>> gen_signal(int n, int k, const SignalPrior& prior,
                                               std::uint64_t seed) {
    if (k < 0 || k >= n)
        throw std::invalid_argument("gen_signal: requires 0 <= k < n");
    if (prior.a >= prior.b)
        throw std::invalid_argument("gen_signal: prior requires a < b");
    Rng rng(seed);
    // partial Fisher-Yates for a uniform k-subset
    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < k; ++i) {
        const std::uint64_t j = i + rng.next_u64() % static_cast<std::uint64_t>(n - i);
        std::swap(pool[i], pool[j]);
    }
    std::vector<int> support(pool.begin(), pool.begin() + k);
    std::sort(support.begin(), support.end());
    Vector x = Vector::Zero(n);
    for (int idx : support)
        x[idx] = prior.a + (prior.b - prior.a) * rng.next_double();
    return {std::move(x), std::move(support)};
}

Vector synthesize(const Matrix& phi, const Vector& x_true, double sigma_w, std::uint64_t seed) {
    if (phi.cols() != x_true.size())
        throw std::invalid_argument("synthesize: dimension mismatch");
    Vector y = phi * x_true;
    if (sigma_w > 0.0) {
        Rng rng(seed);
        for (Eigen::Index i = 0; i < y.size(); ++i)
            y[i] += sigma_w * rng.next_gaussian();
    }
    return y;
}

double sigma_w_from_snr(const Matrix& phi, const Vector& x_true, double snr_db) {
    const double signal_norm = (phi * x_true).norm();
    if (signal_norm == 0.0)
        throw std::invalid_argument("sigma_w_from_snr: zero signal");
    return signal_norm / (std::sqrt(static_cast<double>(phi.rows())) *
                          std::pow(10.0, snr_db / 20.0));
}

double default_epsilon(double y_norm, std::optional<double> snr_db) {
    if (!snr_db.has_value())
        return 1e-7 * y_norm;
    return y_norm * std::pow(10.0, -*snr_db / 20.0);
}

ProblemInstance make_instance(int m, int n, int k, const SignalPrior& prior,
                              std::optional<double> snr_db, std::uint64_t seed) {
    if (m < 1 || n <= m || k < 0 || k >= m)
        throw std::invalid_argument("make_instance: requires 0 <= k < m < n");
    ProblemInstance inst;
    inst.model.m = m;
    inst.model.n = n;
    inst.model.sigma = 1.0 / std::sqrt(static_cast<double>(m));
    inst.prior = prior;
    inst.k = k;
    inst.snr_db = snr_db;
    inst.seed = seed;
    inst.phi = gen_matrix(inst.model, Rng::derive(seed, {kTagMatrix}));
    auto [x, support] = gen_signal(n, k, prior, Rng::derive(seed, {kTagSignal}));
    inst.x_true = std::move(x);
    inst.support_true = std::move(support);
    inst.model.sigma_w = 0.0;
    if (snr_db.has_value() && inst.x_true.norm() > 0.0)
        inst.model.sigma_w = sigma_w_from_snr(inst.phi, inst.x_true, *snr_db);
    inst.y = synthesize(inst.phi, inst.x_true, inst.model.sigma_w, Rng::derive(seed, {kTagNoise}));
    return inst;
}

void save_instance(const ProblemInstance& inst, const std::string& path) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["m"] = inst.model.m;
    j["n"] = inst.model.n;
    j["k"] = inst.k;
    j["sigma"] = inst.model.sigma;
    j["sigma_w"] = inst.model.sigma_w;
    j["prior"] = {{"a", inst.prior.a}, {"b", inst.prior.b}};
    if (inst.snr_db.has_value())
        j["snr_db"] = *inst.snr_db;
    else
        j["snr_db"] = nullptr;
    j["seed"] = inst.seed;
    j["noise_seed"] = Rng::derive(inst.seed, {kTagNoise});
    j["support"] = inst.support_true;
    std::vector<double> phi_flat(inst.phi.data(), inst.phi.data() + inst.phi.size());
    std::vector<double> x_flat(inst.x_true.data(), inst.x_true.data() + inst.x_true.size());
    j["phi_b64"] = base64_encode(phi_flat);
    j["x_b64"] = base64_encode(x_flat);

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("save_instance: cannot open " + path);
    out << j.dump(2) << '\n';
    if (!out)
        throw std::runtime_error("save_instance: write failed for " + path);
}

ProblemInstance load_instance(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("load_instance: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load_instance: parse error in " + path + ": " + e.what());
    }
    if (!j.contains("schema_version") || !j["schema_version"].is_number_integer())
        throw std::runtime_error("load_instance: missing schema_version in " + path);
    const int version = j["schema_version"].get<int>();
    if (version != 1)
        throw std::runtime_error("load_instance: unsupported schema version " +
                                 std::to_string(version) + " in " + path);
    try {
        ProblemInstance inst;
        inst.model.m = j.at("m").get<int>();
        inst.model.n = j.at("n").get<int>();
        inst.k = j.at("k").get<int>();
        inst.model.sigma = j.at("sigma").get<double>();
        inst.model.sigma_w = j.at("sigma_w").get<double>();
        inst.prior.a = j.at("prior").at("a").get<double>();
        inst.prior.b = j.at("prior").at("b").get<double>();
        if (!j.at("snr_db").is_null())
            inst.snr_db = j.at("snr_db").get<double>();
        inst.seed = j.at("seed").get<std::uint64_t>();
        inst.support_true = j.at("support").get<std::vector<int>>();
        const auto m = static_cast<std::size_t>(inst.model.m);
        const auto n = static_cast<std::size_t>(inst.model.n);
        const auto phi_flat = base64_decode(j.at("phi_b64").get<std::string>(), m * n);
        const auto x_flat = base64_decode(j.at("x_b64").get<std::string>(), n);
        inst.phi = Eigen::Map<const Matrix>(phi_flat.data(), inst.model.m, inst.model.n);
        inst.x_true = Eigen::Map<const Vector>(x_flat.data(), inst.model.n);
        const auto noise_seed = j.at("noise_seed").get<std::uint64_t>();
        inst.y = synthesize(inst.phi, inst.x_true, inst.model.sigma_w, noise_seed);
        return inst;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load_instance: malformed file " + path + ": " + e.what());
    }
}

}  // namespace bmmp
