#pragma once

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "swelltopo/error.hpp"
#include "swelltopo/io.hpp"
#include "swelltopo/neural/network.hpp"

namespace swelltopo {

inline constexpr const char* kSnapshotMagic = "swelltopo-network";
inline constexpr int kSnapshotVersion = 1;

/// Text snapshot: a keyword header followed by the frequency matrix and the
/// flat parameter vector, all doubles printed round-trip exact.
inline std::string serialize_network(const DesignNetwork& net) {
    const auto& c = net.config();
    std::ostringstream os;
    os << kSnapshotMagic << ' ' << kSnapshotVersion << '\n';
    os << "seed " << c.seed << '\n';
    os << "num_fourier " << c.num_fourier << '\n';
    os << "sigma " << format_double(c.sigma) << '\n';
    os << "hidden " << c.hidden.size();
    for (int h : c.hidden) os << ' ' << h;
    os << '\n';
    os << "num_phases " << c.num_phases << '\n';
    os << "angle_head " << (c.angle_head ? 1 : 0) << '\n';
    const auto& b = c.normalization;
    os << "normalization " << format_double(b.xmin) << ' ' << format_double(b.xmax) << ' ' << format_double(b.ymin)
       << ' ' << format_double(b.ymax) << '\n';
    os << "frequencies\n";
    for (Eigen::Index i = 0; i < net.frequencies().rows(); ++i)
        os << format_double(net.frequencies()(i, 0)) << ' ' << format_double(net.frequencies()(i, 1)) << '\n';
    os << "params " << net.num_params() << '\n';
    for (double w : net.params()) os << format_double(w) << '\n';
    return os.str();
}

inline DesignNetwork parse_network(const std::string& text) {
    std::istringstream is(text);
    auto expect = [&](const std::string& key) {
        std::string k;
        if (!(is >> k) || k != key) throw ConfigError("network snapshot: expected '" + key + "'");
    };
    int version = 0;
    expect(kSnapshotMagic);
    if (!(is >> version) || version != kSnapshotVersion) throw ConfigError("network snapshot: unsupported version");
    NetworkConfig c;
    std::size_t nh = 0;
    expect("seed");
    is >> c.seed;
    expect("num_fourier");
    is >> c.num_fourier;
    expect("sigma");
    is >> c.sigma;
    expect("hidden");
    is >> nh;
    if (!is || nh > 64) throw ConfigError("network snapshot: bad hidden layer count");
    c.hidden.assign(nh, 0);
    for (auto& h : c.hidden) is >> h;
    int angle = 0;
    expect("num_phases");
    is >> c.num_phases;
    expect("angle_head");
    is >> angle;
    c.angle_head = angle != 0;
    expect("normalization");
    is >> c.normalization.xmin >> c.normalization.xmax >> c.normalization.ymin >> c.normalization.ymax;
    if (!is) throw ConfigError("network snapshot: malformed header");
    if (auto v = c.violations(); !v.empty()) throw ConfigError(v);
    expect("frequencies");
    RowMatrix B(c.num_fourier, 2);
    for (int i = 0; i < c.num_fourier; ++i) is >> B(i, 0) >> B(i, 1);
    expect("params");
    long long n = 0;
    is >> n;
    if (!is || n < 0 || n > 100'000'000) throw ConfigError("network snapshot: bad parameter count");
    std::vector<double> w(static_cast<std::size_t>(n));
    for (auto& x : w) is >> x;
    if (!is) throw ConfigError("network snapshot: truncated data");
    return DesignNetwork(c, std::move(B), std::move(w));
}

inline void save_network(const std::filesystem::path& path, const DesignNetwork& net) {
    atomic_write(path, serialize_network(net));
}

inline DesignNetwork load_network(const std::filesystem::path& path) { return parse_network(read_file(path)); }

} // namespace swelltopo
