#pragma once

// Wind forecast-error sampling: reproducible counter-based Gaussian draws,
// Gaussian fitting from sample sets, and CSV ingestion of external
// realizations (values in MW, converted to per-unit on load).

#include <Eigen/Dense>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccopf/gaussian.hpp"
#include "ccopf/model.hpp"

namespace ccopf {

enum class SampleProvenance { SyntheticGaussian, ExternalFile };

struct SampleSet {
    Eigen::MatrixXd data;  // n_samples x |W|, per-unit forecast errors
    SampleProvenance provenance = SampleProvenance::SyntheticGaussian;
    std::uint64_t seed = 0;

    int count() const { return static_cast<int>(data.rows()); }
    int dims() const { return static_cast<int>(data.cols()); }
};

/// SplitMix64 finalizer; the counter-based generator hashes
/// (seed, sample index, dimension) so draws are order-independent.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline double counter_uniform(std::uint64_t seed, std::uint64_t index, std::uint64_t dim) {
    std::uint64_t h = mix64(seed ^ mix64(index * 0x100000001B3ull + dim));
    return (static_cast<double>(h >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

inline double counter_normal(std::uint64_t seed, std::uint64_t index, std::uint64_t dim) {
    return normal_quantile(counter_uniform(seed, index, dim));
}

/// Derives an independent sub-seed from a master seed and a purpose tag;
/// used to split one configuration seed across sampling stages.
inline std::uint64_t derive_seed(std::uint64_t master, const std::string& purpose) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char ch : purpose) h = (h ^ static_cast<unsigned char>(ch)) * 0x100000001B3ull;
    return mix64(master ^ h);
}

/// Draws n zero-mean samples with the model covariance; deterministic in
/// (model, n, seed) and stable under parallel evaluation by sample index.
inline SampleSet sample_gaussian(const WindModel& model, int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_gaussian: need n >= 1");
    int d = model.dim();
    SampleSet out;
    out.provenance = SampleProvenance::SyntheticGaussian;
    out.seed = seed;
    out.data.resize(n, d);
    const Eigen::MatrixXd& root = model.sqrt_covariance();
    Eigen::VectorXd z(d);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < d; ++k) z[k] = counter_normal(seed, static_cast<std::uint64_t>(i), k);
        out.data.row(i) = (root * z).transpose();
    }
    return out;
}

/// Fits a zero-mean Gaussian error model: the sample mean becomes the
/// forecast adjustment, the covariance uses the unbiased estimator with
/// symmetrization and eigenvalue clipping.
inline WindModel fit_gaussian(const SampleSet& samples) {
    int n = samples.count(), d = samples.dims();
    if (n < 2) throw std::invalid_argument("fit_gaussian: need at least 2 samples");
    Eigen::VectorXd mean = samples.data.colwise().mean();
    Eigen::MatrixXd centered = samples.data.rowwise() - mean.transpose();
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
    cov = 0.5 * (cov + cov.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0);
    cov = eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
    cov = 0.5 * (cov + cov.transpose());
    (void)d;
    return WindModel(mean, cov, "fitted");
}

/// Builds the synthetic per-case Gaussian model: per-farm standard
/// deviation as a fraction of the forecast, uniform pairwise correlation.
inline WindModel synthetic_wind_model(const Network& net, double sigma_rel, double correlation) {
    int w = net.num_wind();
    Eigen::VectorXd sig(w);
    for (int i = 0; i < w; ++i) sig[i] = sigma_rel * net.wind_farms[i].p_forecast;
    Eigen::MatrixXd cov(w, w);
    for (int i = 0; i < w; ++i)
        for (int j = 0; j < w; ++j) cov(i, j) = (i == j ? 1.0 : correlation) * sig[i] * sig[j];
    return WindModel(Eigen::VectorXd::Zero(w), cov, "synthetic");
}

/// Loads forecast-error realizations from CSV: header row names the wind
/// farms by bus id, one row per realization, values in MW.
inline SampleSet load_samples(std::istream& in, const Network& net) {
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("sample CSV: empty file");
    std::vector<int> col_to_farm;
    {
        std::istringstream hs(header);
        std::string tok;
        while (std::getline(hs, tok, ',')) {
            int id;
            try {
                id = std::stoi(tok);
            } catch (const std::exception&) {
                throw std::runtime_error("sample CSV: header column '" + tok + "' is not a farm id");
            }
            int farm = -1;
            for (int wf = 0; wf < net.num_wind(); ++wf)
                if (net.wind_farms[wf].bus == id) farm = wf;
            if (farm < 0)
                throw std::runtime_error("sample CSV: unknown wind farm id " + std::to_string(id));
            col_to_farm.push_back(farm);
        }
    }
    if (static_cast<int>(col_to_farm.size()) != net.num_wind())
        throw std::runtime_error("sample CSV: expected " + std::to_string(net.num_wind()) +
                                 " farm columns, found " + std::to_string(col_to_farm.size()));

    std::vector<Eigen::VectorXd> rows;
    std::string line;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::istringstream ls(line);
        std::string cell;
        Eigen::VectorXd row(net.num_wind());
        int c = 0;
        while (std::getline(ls, cell, ',')) {
            if (c >= static_cast<int>(col_to_farm.size()))
                throw std::runtime_error("sample CSV line " + std::to_string(lineno) + ": too many cells");
            try {
                size_t used = 0;
                double v = std::stod(cell, &used);
                row[col_to_farm[c]] = net.to_pu(v);
            } catch (const std::exception&) {
                throw std::runtime_error("sample CSV line " + std::to_string(lineno) +
                                         ": non-numeric cell '" + cell + "'");
            }
            ++c;
        }
        if (c != static_cast<int>(col_to_farm.size()))
            throw std::runtime_error("sample CSV line " + std::to_string(lineno) + ": missing cells");
        rows.push_back(row);
    }
    if (rows.empty()) throw std::runtime_error("sample CSV: no samples");
    SampleSet out;
    out.provenance = SampleProvenance::ExternalFile;
    out.data.resize(static_cast<int>(rows.size()), net.num_wind());
    for (size_t i = 0; i < rows.size(); ++i) out.data.row(static_cast<int>(i)) = rows[i].transpose();
    return out;
}

/// Writes a sample set in the CSV contract (MW values, farm-id header).
inline void save_samples(std::ostream& os, const SampleSet& samples, const Network& net) {
    for (int w = 0; w < net.num_wind(); ++w)
        os << (w ? "," : "") << net.wind_farms[w].bus;
    os << "\n";
    char buf[40];
    for (int i = 0; i < samples.count(); ++i) {
        for (int w = 0; w < samples.dims(); ++w) {
            std::snprintf(buf, sizeof buf, "%.10g", net.to_mw(samples.data(i, w)));
            os << (w ? "," : "") << buf;
        }
        os << "\n";
    }
}

/// Correlated two-component Gaussian mixture with heavier tails and skew:
/// zero mean, covariance approximately matching `model`. Used to exercise
/// model mismatch in out-of-sample analysis.
inline SampleSet sample_mixture(const WindModel& model, int n, std::uint64_t seed) {
    int d = model.dim();
    SampleSet out;
    out.provenance = SampleProvenance::SyntheticGaussian;
    out.seed = seed;
    out.data.resize(n, d);
    const Eigen::MatrixXd& root = model.sqrt_covariance();
    Eigen::VectorXd u = Eigen::VectorXd::Ones(d).normalized();
    const double w2 = 0.25;              // tail-component weight
    const double skew1 = 0.2, skew2 = -0.6;
    const double s1 = std::sqrt(0.64), s2 = std::sqrt(1.6);
    Eigen::VectorXd z(d);
    for (int i = 0; i < n; ++i) {
        double pick = counter_uniform(seed, static_cast<std::uint64_t>(i), 1000);
        bool tail = pick < w2;
        for (int k = 0; k < d; ++k) z[k] = counter_normal(seed, static_cast<std::uint64_t>(i), k);
        Eigen::VectorXd y = (tail ? s2 : s1) * z + (tail ? skew2 : skew1) * u;
        out.data.row(i) = (root * y).transpose();
    }
    return out;
}

}  // namespace ccopf
