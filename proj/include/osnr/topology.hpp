#pragma once

// Physical link model: amplified spans with wavelength-dependent gain and ASE
// noise, and construction of the channel coupling matrix Gamma from it.
//
// All powers are in mW; dB appears only in gain profile parameters and span
// losses.

#include <osnr/errors.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace osnr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

namespace constants {
inline constexpr double planck = 6.62607015e-34;       // J s
inline constexpr double speed_of_light = 299792458.0;  // m/s
}  // namespace constants

[[nodiscard]] inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

struct GainProfile {
    enum class Shape { parabolic, flat, tabulated };

    Shape shape = Shape::parabolic;
    double peak_gain_dB = 30.0;
    double center_nm = 1555.0;
    double curvature_dB_per_nm2 = 0.05;
    /// (wavelength_nm, gain_dB) pairs, strictly increasing in wavelength.
    std::vector<std::pair<double, double>> table;

    static GainProfile parabolic(double peak_dB, double center_nm, double curvature) {
        return GainProfile{Shape::parabolic, peak_dB, center_nm, curvature, {}};
    }
    static GainProfile flat(double peak_dB) {
        return GainProfile{Shape::flat, peak_dB, 0.0, 0.0, {}};
    }
    static GainProfile tabulated(std::vector<std::pair<double, double>> table) {
        double peak = table.empty() ? 0.0 : table.front().second;
        for (const auto& entry : table) peak = std::max(peak, entry.second);
        return GainProfile{Shape::tabulated, peak, 0.0, 0.0, std::move(table)};
    }

    void validate() const {
        if (!(peak_gain_dB > 0.0))
            throw Error(ErrorKind::Validation, "gain profile: peak_gain_dB must be > 0");
        if (!(curvature_dB_per_nm2 >= 0.0))
            throw Error(ErrorKind::Validation, "gain profile: curvature_dB_per_nm2 must be >= 0");
        if (shape == Shape::tabulated) {
            if (table.size() < 2)
                throw Error(ErrorKind::Validation, "gain profile: tabulated shape needs at least 2 entries");
            for (std::size_t k = 0; k < table.size(); ++k) {
                if (k > 0 && !(table[k].first > table[k - 1].first))
                    throw Error(ErrorKind::Validation,
                                "gain profile: tabulated wavelengths must be strictly increasing");
                if (table[k].second > peak_gain_dB)
                    throw Error(ErrorKind::Validation, "gain profile: tabulated gain exceeds peak_gain_dB");
            }
        }
    }

    /// Wavelength interval on which the profile is defined. A parabola is kept
    /// only where it stays at or above 0 dB.
    [[nodiscard]] std::pair<double, double> validity_range() const {
        switch (shape) {
            case Shape::flat:
                return {0.0, std::numeric_limits<double>::infinity()};
            case Shape::tabulated:
                return {table.front().first, table.back().first};
            case Shape::parabolic:
                break;
        }
        if (curvature_dB_per_nm2 == 0.0) return {0.0, std::numeric_limits<double>::infinity()};
        const double half_width = std::sqrt(peak_gain_dB / curvature_dB_per_nm2);
        return {center_nm - half_width, center_nm + half_width};
    }
};

[[nodiscard]] inline double evaluate_gain_dB(const GainProfile& profile, double wavelength_nm) {
    if (!(wavelength_nm > 0.0)) throw Error(ErrorKind::Range, "gain profile: wavelength must be > 0");
    const auto [lo, hi] = profile.validity_range();
    if (wavelength_nm < lo || wavelength_nm > hi)
        throw Error(ErrorKind::Range, "gain profile: wavelength " + detail::num(wavelength_nm) +
                                          " nm outside validity range [" + detail::num(lo) + ", " +
                                          detail::num(hi) + "]");
    switch (profile.shape) {
        case GainProfile::Shape::flat:
            return profile.peak_gain_dB;
        case GainProfile::Shape::parabolic: {
            const double offset = wavelength_nm - profile.center_nm;
            return profile.peak_gain_dB - profile.curvature_dB_per_nm2 * offset * offset;
        }
        case GainProfile::Shape::tabulated:
            break;
    }
    const auto& table = profile.table;
    auto upper = std::lower_bound(table.begin(), table.end(), wavelength_nm,
                                  [](const auto& entry, double w) { return entry.first < w; });
    if (upper == table.begin()) return upper->second;
    const auto lower = std::prev(upper);
    const double t = (wavelength_nm - lower->first) / (upper->first - lower->first);
    return lower->second + t * (upper->second - lower->second);
}

/// Linear gain ratio at a wavelength.
[[nodiscard]] inline double evaluate_gain(const GainProfile& profile, double wavelength_nm) {
    return db_to_linear(evaluate_gain_dB(profile, wavelength_nm));
}

struct AseParams {
    double nsp = 1.5;
    double optical_bandwidth_GHz = 12.5;
    /// Direct per-span ASE power, bypassing the EDFA formula.
    std::optional<double> fixed_ase_mW;

    void validate() const {
        if (!(nsp >= 0.0)) throw Error(ErrorKind::Validation, "ase: nsp must be >= 0");
        if (!(optical_bandwidth_GHz > 0.0))
            throw Error(ErrorKind::Validation, "ase: optical_bandwidth_GHz must be > 0");
        if (fixed_ase_mW && !(*fixed_ase_mW >= 0.0))
            throw Error(ErrorKind::Validation, "ase: fixed_ase_mW must be >= 0");
    }
};

struct Span {
    GainProfile gain;
    double loss_dB = 0.0;
    AseParams ase;

    void validate() const {
        gain.validate();
        ase.validate();
        if (!(loss_dB >= 0.0)) throw Error(ErrorKind::Validation, "span: loss_dB must be >= 0");
    }
};

struct Link {
    std::string id;
    std::vector<Span> spans;
    /// Per-span amplifier total output power target (mW).
    double output_power_mW = 1.0;

    void validate() const {
        if (spans.empty()) throw Error(ErrorKind::Validation, "link '" + id + "': spans must be non-empty");
        if (!(output_power_mW > 0.0))
            throw Error(ErrorKind::Validation, "link '" + id + "': output_power_mW must be > 0");
        for (const auto& span : spans) span.validate();
    }
};

struct LinkNetwork {
    std::vector<Link> links;

    [[nodiscard]] const Link* find(const std::string& id) const {
        auto it = std::find_if(links.begin(), links.end(), [&](const Link& l) { return l.id == id; });
        return it == links.end() ? nullptr : &*it;
    }

    void validate() const {
        for (std::size_t k = 0; k < links.size(); ++k) {
            links[k].validate();
            for (std::size_t q = 0; q < k; ++q)
                if (links[q].id == links[k].id)
                    throw Error(ErrorKind::Validation, "network: duplicate link id '" + links[k].id + "'");
        }
    }
};

struct ChannelSpec {
    std::size_t id = 0;
    double wavelength_nm = 1555.0;
    double tx_noise_mW = 0.0;
    /// Ordered link ids from transmitter to receiver.
    std::vector<std::string> route;

    void validate(const LinkNetwork& network) const {
        const std::string who = "channel " + std::to_string(id + 1);
        if (!(wavelength_nm > 0.0)) throw Error(ErrorKind::Validation, who + ": wavelength_nm must be > 0");
        if (!(tx_noise_mW >= 0.0)) throw Error(ErrorKind::Validation, who + ": tx_noise_mW must be >= 0");
        if (route.empty()) throw Error(ErrorKind::Topology, who + ": route must be non-empty");
        for (std::size_t k = 0; k < route.size(); ++k) {
            if (!network.find(route[k]))
                throw Error(ErrorKind::Topology, who + ": route references unknown link '" + route[k] + "'");
            for (std::size_t q = 0; q < k; ++q)
                if (route[q] == route[k])
                    throw Error(ErrorKind::Topology, who + ": route visits link '" + route[k] + "' twice");
        }
    }
};

struct SystemMatrix {
    Matrix gamma;
    Vector n0;

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(n0.size()); }

    void validate() const {
        if (gamma.rows() != gamma.cols())
            throw Error(ErrorKind::Dimension, "system matrix: gamma must be square");
        if (gamma.rows() != n0.size())
            throw Error(ErrorKind::Dimension, "system matrix: gamma and n0 dimensions differ");
        if (n0.size() == 0) throw Error(ErrorKind::Dimension, "system matrix: empty");
        if (!gamma.allFinite() || !n0.allFinite())
            throw Error(ErrorKind::Validation, "system matrix: non-finite entry");
        if ((gamma.array() < 0.0).any())
            throw Error(ErrorKind::Validation, "system matrix: gamma entries must be >= 0");
        if ((n0.array() < 0.0).any())
            throw Error(ErrorKind::Validation, "system matrix: n0 entries must be >= 0");
    }
};

struct AseSample {
    double mW = 0.0;
    /// Formula mode with G < 1: the span attenuates and the ASE was clamped to 0.
    bool clamped = false;
};

/// ASE added by one span in a channel's bandwidth: 2 nsp h nu (G - 1) B_o.
[[nodiscard]] inline AseSample span_ase(const Span& span, const ChannelSpec& channel) {
    if (span.ase.fixed_ase_mW) return {*span.ase.fixed_ase_mW, false};
    const double gain = evaluate_gain(span.gain, channel.wavelength_nm);
    if (gain < 1.0) return {0.0, true};
    const double frequency_Hz = constants::speed_of_light / (channel.wavelength_nm * 1e-9);
    const double watts = 2.0 * span.ase.nsp * constants::planck * frequency_Hz * (gain - 1.0) *
                         span.ase.optical_bandwidth_GHz * 1e9;
    return {watts * 1e3, false};
}

/// Gamma_ij = sum over links l on channel i's route that j also traverses, and
/// spans k of l, of
///
///     (G^k_{l,j} / G^k_{l,i}) * prod_{q before l on i's route} (T_{q,j} / T_{q,i})
///         * ASE_{l,k,i} / P_{0,l}
///
/// where G^k_{l,i} is the cumulative gain*loss product through span k of link l
/// for channel i and T_{l,i} the same product over the whole link.
[[nodiscard]] inline SystemMatrix build_system_matrix(const LinkNetwork& network,
                                                      std::span<const ChannelSpec> channels,
                                                      std::vector<std::string>* warnings = nullptr) {
    if (channels.empty()) throw Error(ErrorKind::Dimension, "build_system_matrix: empty channel list");
    network.validate();
    for (const auto& channel : channels) channel.validate(network);

    const std::size_t n = channels.size();
    const std::size_t n_links = network.links.size();
    auto link_index = [&](const std::string& id) {
        return static_cast<std::size_t>(network.find(id) - network.links.data());
    };

    // cumulative[l][i][k] and transfer[l][i] for every (link, channel) pair.
    std::vector<std::vector<std::vector<double>>> cumulative(n_links, std::vector<std::vector<double>>(n));
    std::vector<std::vector<double>> transfer(n_links, std::vector<double>(n, 1.0));
    std::vector<std::vector<bool>> traverses(n_links, std::vector<bool>(n, false));
    for (std::size_t l = 0; l < n_links; ++l) {
        const Link& link = network.links[l];
        for (std::size_t i = 0; i < n; ++i) {
            double product = 1.0;
            cumulative[l][i].reserve(link.spans.size());
            for (const Span& span : link.spans) {
                product *= evaluate_gain(span.gain, channels[i].wavelength_nm) * db_to_linear(-span.loss_dB);
                cumulative[l][i].push_back(product);
            }
            transfer[l][i] = product;
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& id : channels[i].route) traverses[link_index(id)][i] = true;

    SystemMatrix sys;
    sys.gamma = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    sys.n0.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        sys.n0(static_cast<Eigen::Index>(i)) = channels[i].tx_noise_mW;
        const auto& route = channels[i].route;
        for (std::size_t p = 0; p < route.size(); ++p) {
            const std::size_t l = link_index(route[p]);
            const Link& link = network.links[l];
            std::vector<double> ase(link.spans.size());
            for (std::size_t k = 0; k < link.spans.size(); ++k) {
                const AseSample sample = span_ase(link.spans[k], channels[i]);
                if (sample.clamped && warnings)
                    warnings->push_back("link '" + link.id + "' span " + std::to_string(k + 1) +
                                        ": gain below 1 for channel " + std::to_string(i + 1) +
                                        ", ASE clamped to 0");
                ase[k] = sample.mW;
            }
            for (std::size_t j = 0; j < n; ++j) {
                if (!traverses[l][j]) continue;
                double upstream = 1.0;
                for (std::size_t q = 0; q < p; ++q) {
                    const std::size_t lq = link_index(route[q]);
                    upstream *= transfer[lq][j] / transfer[lq][i];
                }
                double term = 0.0;
                for (std::size_t k = 0; k < link.spans.size(); ++k)
                    term += cumulative[l][j][k] / cumulative[l][i][k] * ase[k];
                sys.gamma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +=
                    upstream * term / link.output_power_mW;
            }
        }
    }
    return sys;
}

}  // namespace osnr
