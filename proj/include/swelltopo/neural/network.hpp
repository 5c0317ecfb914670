#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "swelltopo/error.hpp"
#include "swelltopo/fem/mesh.hpp"

namespace swelltopo {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct NetworkConfig {
    std::uint64_t seed = 0;
    int num_fourier = 64;
    double sigma = 4.0;            // std. dev. of the frequency matrix in normalized coordinates
    std::vector<int> hidden{40, 40};
    int num_phases = 3;            // softmax head width, 0 for no density head
    bool angle_head = false;       // sigmoid head scaled to [0, pi)
    Box normalization{0, 1, 0, 1}; // mapped affinely to [-1, 1]^2

    int num_outputs() const { return num_phases + (angle_head ? 1 : 0); }

    std::vector<std::string> violations() const {
        std::vector<std::string> v;
        if (num_fourier < 1) v.push_back("network num_fourier must be positive");
        if (!(sigma > 0) || !std::isfinite(sigma)) v.push_back("network sigma must be positive");
        if (hidden.empty()) v.push_back("network needs at least one hidden layer");
        for (int h : hidden)
            if (h < 1) v.push_back("network hidden widths must be positive");
        if (num_phases < 0 || num_phases == 1) v.push_back("network num_phases must be 0 or at least 2");
        if (num_outputs() < 1) v.push_back("network needs a density head, an angle head, or both");
        if (!(normalization.xmax > normalization.xmin) || !(normalization.ymax > normalization.ymin))
            v.push_back("network normalization box must have positive extent");
        return v;
    }
    bool operator==(const NetworkConfig&) const = default;
};

/// Network outputs at a batch of points: rho is n x num_phases, theta has n entries.
struct DesignFieldSamples {
    RowMatrix rho;
    Eigen::VectorXd theta;
};

/// Fourier features, ReLU trunk and softmax/sigmoid heads. Trainable
/// parameters live in one flat vector ordered W1, b1, W2, b2, ..., W_out, b_out
/// with each W stored row-major (out x in).
class DesignNetwork {
public:
    DesignNetwork() = default;

    explicit DesignNetwork(NetworkConfig cfg) : cfg_(std::move(cfg)) {
        if (auto v = cfg_.violations(); !v.empty()) throw ConfigError(v);
        std::mt19937_64 rng(cfg_.seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        B_.resize(cfg_.num_fourier, 2);
        for (int i = 0; i < cfg_.num_fourier; ++i)
            for (int j = 0; j < 2; ++j) B_(i, j) = cfg_.sigma * normal(rng);
        layout();
        params_.assign(num_params(), 0.0);
        for (std::size_t l = 0; l < shapes_.size(); ++l) {
            const auto [out, in] = shapes_[l];
            const double sd = std::sqrt(2.0 / (in + out));
            double* w = params_.data() + offsets_[l];
            for (int k = 0; k < out * in; ++k) w[k] = sd * normal(rng);
        }
    }

    /// Rebuilds a network from stored pieces (snapshot loading).
    DesignNetwork(NetworkConfig cfg, RowMatrix B, std::vector<double> params) : cfg_(std::move(cfg)), B_(std::move(B)) {
        if (auto v = cfg_.violations(); !v.empty()) throw ConfigError(v);
        layout();
        if (B_.rows() != cfg_.num_fourier || B_.cols() != 2) throw ConfigError("frequency matrix has the wrong shape");
        if (static_cast<int>(params.size()) != num_params()) throw ConfigError("parameter vector has the wrong length");
        params_ = std::move(params);
    }

    const NetworkConfig& config() const { return cfg_; }
    const RowMatrix& frequencies() const { return B_; }
    const std::vector<double>& params() const { return params_; }
    std::vector<double>& params() { return params_; }
    int num_params() const { return total_; }
    int num_layers() const { return static_cast<int>(shapes_.size()); }
    std::pair<int, int> layer_shape(int l) const { return shapes_[l]; }

    Eigen::Map<const RowMatrix> weight(int l) const {
        return {params_.data() + offsets_[l], shapes_[l].first, shapes_[l].second};
    }
    Eigen::Map<const Eigen::VectorXd> bias(int l) const {
        return {params_.data() + offsets_[l] + shapes_[l].first * shapes_[l].second, shapes_[l].first};
    }

    /// Affine map of physical coordinates (rows) into [-1, 1]^2.
    RowMatrix normalize(const RowMatrix& x) const {
        const auto& b = cfg_.normalization;
        RowMatrix n(x.rows(), 2);
        n.col(0) = (2.0 * (x.col(0).array() - b.xmin) / (b.xmax - b.xmin) - 1.0).matrix();
        n.col(1) = (2.0 * (x.col(1).array() - b.ymin) / (b.ymax - b.ymin) - 1.0).matrix();
        return n;
    }

    /// [cos(2 pi B x); sin(2 pi B x)] for each row of normalized coordinates.
    RowMatrix features(const RowMatrix& xn) const {
        const RowMatrix arg = 2.0 * std::numbers::pi * xn * B_.transpose();
        RowMatrix f(xn.rows(), 2 * cfg_.num_fourier);
        f.leftCols(cfg_.num_fourier) = arg.array().cos().matrix();
        f.rightCols(cfg_.num_fourier) = arg.array().sin().matrix();
        return f;
    }

    DesignFieldSamples evaluate(const RowMatrix& coords) const {
        Forward fw = forward(coords);
        return heads(fw.out);
    }

    /// Gradient of sum(d_rho .* rho) + sum(d_theta .* theta) with respect to
    /// the flat parameter vector. Either cotangent may be empty.
    std::vector<double> pullback(const RowMatrix& coords, const RowMatrix& d_rho, const Eigen::VectorXd& d_theta) const {
        const Forward fw = forward(coords);
        const auto s = heads(fw.out);
        const Eigen::Index n = coords.rows();
        const int P = cfg_.num_phases;
        RowMatrix d_out = RowMatrix::Zero(n, cfg_.num_outputs());
        if (P > 0 && d_rho.size() > 0) {
            if (d_rho.rows() != n || d_rho.cols() != P) throw ContractError("density cotangent has the wrong shape");
            const Eigen::VectorXd dot = (d_rho.array() * s.rho.array()).rowwise().sum();
            d_out.leftCols(P) = (s.rho.array() * (d_rho.colwise() - dot).array()).matrix();
        }
        if (cfg_.angle_head && d_theta.size() > 0) {
            if (d_theta.size() != n) throw ContractError("angle cotangent has the wrong length");
            const Eigen::ArrayXd sg = s.theta.array() / std::numbers::pi;
            d_out.col(P) = (d_theta.array() * std::numbers::pi * sg * (1.0 - sg)).matrix();
        }

        std::vector<double> grad(num_params(), 0.0);
        RowMatrix delta = d_out;
        for (int l = num_layers() - 1; l >= 0; --l) {
            const RowMatrix& input = l == 0 ? fw.feat : fw.act[l - 1];
            const auto [out, in] = shapes_[l];
            Eigen::Map<RowMatrix> gW(grad.data() + offsets_[l], out, in);
            Eigen::Map<Eigen::VectorXd> gb(grad.data() + offsets_[l] + out * in, out);
            gW = delta.transpose() * input;
            gb = delta.colwise().sum().transpose();
            if (l == 0) break;
            RowMatrix back = delta * weight(l);
            delta = (back.array() * (fw.pre[l - 1].array() > 0.0).cast<double>()).matrix();
        }
        return grad;
    }

private:
    struct Forward {
        RowMatrix feat;
        std::vector<RowMatrix> pre, act; // hidden layers only
        RowMatrix out;
    };

    void layout() {
        shapes_.clear();
        offsets_.clear();
        int in = 2 * cfg_.num_fourier;
        total_ = 0;
        auto push = [&](int out) {
            shapes_.emplace_back(out, in);
            offsets_.push_back(total_);
            total_ += out * in + out;
            in = out;
        };
        for (int h : cfg_.hidden) push(h);
        push(cfg_.num_outputs());
    }

    Forward forward(const RowMatrix& coords) const {
        if (coords.cols() != 2) throw ContractError("network coordinates must have two columns");
        if (!coords.allFinite()) throw ContractError("network coordinates must be finite");
        Forward fw;
        fw.feat = features(normalize(coords));
        const RowMatrix* x = &fw.feat;
        for (int l = 0; l + 1 < num_layers(); ++l) {
            RowMatrix z = *x * weight(l).transpose();
            z.rowwise() += bias(l).transpose();
            fw.pre.push_back(z);
            fw.act.push_back(z.cwiseMax(0.0));
            x = &fw.act.back();
        }
        const int L = num_layers() - 1;
        fw.out = *x * weight(L).transpose();
        fw.out.rowwise() += bias(L).transpose();
        return fw;
    }

    DesignFieldSamples heads(const RowMatrix& out) const {
        DesignFieldSamples s;
        const int P = cfg_.num_phases;
        if (P > 0) {
            s.rho.resize(out.rows(), P);
            for (Eigen::Index i = 0; i < out.rows(); ++i) {
                const Eigen::RowVectorXd z = out.row(i).head(P);
                const Eigen::RowVectorXd e = (z.array() - z.maxCoeff()).exp().matrix();
                s.rho.row(i) = e / e.sum();
            }
        }
        if (cfg_.angle_head) {
            const Eigen::VectorXd z = out.col(P);
            s.theta = (std::numbers::pi / (1.0 + (-z.array()).exp())).matrix();
            // Keep the angle strictly below pi when the sigmoid saturates to 1.
            for (double& t : s.theta)
                if (t >= std::numbers::pi) t = std::nextafter(std::numbers::pi, 0.0);
        }
        return s;
    }

    NetworkConfig cfg_;
    RowMatrix B_;
    std::vector<double> params_;
    std::vector<std::pair<int, int>> shapes_;
    std::vector<int> offsets_;
    int total_ = 0;
};

/// Coordinates of element centroids (rows).
inline RowMatrix centroid_coords(const QuadMesh& mesh) {
    RowMatrix x(mesh.num_elements(), 2);
    for (int e = 0; e < mesh.num_elements(); ++e) x.row(e) = mesh.centroid(e).transpose();
    return x;
}

/// Coordinates of the Gauss points, element-major (4 rows per element).
inline RowMatrix gauss_coords(const QuadMesh& mesh) {
    RowMatrix x(4 * mesh.num_elements(), 2);
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const auto geo = element_geometry(mesh, e);
        for (int g = 0; g < 4; ++g) x.row(4 * e + g) = geo.gauss_points[g].transpose();
    }
    return x;
}

/// Bandwidth default: the largest of roughly 2.5 sigma among the frequency
/// draws lands near a wavelength of four elements across the longer side.
inline double default_sigma(int nx, int ny) { return std::max(nx, ny) / 16.0; }

} // namespace swelltopo
