#include "zpafdm/modulation.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace zpafdm {

std::string to_string(ModulationKind kind) {
    switch (kind) {
        case ModulationKind::Bpsk: return "bpsk";
        case ModulationKind::Qpsk: return "qpsk";
        case ModulationKind::Qam16: return "16qam";
    }
    return "unknown";
}

ModulationKind parse_modulation(const std::string& name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "bpsk") return ModulationKind::Bpsk;
    if (lower == "qpsk") return ModulationKind::Qpsk;
    if (lower == "16qam" || lower == "qam16") return ModulationKind::Qam16;
    throw std::invalid_argument("unsupported modulation '" + name + "'");
}

namespace {

// Gray pair -> amplitude level: 00 -> +1, 01 -> +3, 10 -> -1, 11 -> -3
double qam16_level(unsigned sign_bit, unsigned magnitude_bit) {
    return (sign_bit ? -1.0 : 1.0) * (magnitude_bit ? 3.0 : 1.0);
}

}  // namespace

Constellation Constellation::make(ModulationKind kind) {
    Constellation c{kind, 0, {}};
    switch (kind) {
        case ModulationKind::Bpsk:
            c.bits_per_symbol = 1;
            c.points = {cplx{1.0, 0.0}, cplx{-1.0, 0.0}};
            break;
        case ModulationKind::Qpsk: {
            c.bits_per_symbol = 2;
            const double a = 1.0 / std::sqrt(2.0);
            for (unsigned k = 0; k < 4; ++k)
                c.points.emplace_back((k & 2u) ? -a : a, (k & 1u) ? -a : a);
            break;
        }
        case ModulationKind::Qam16: {
            c.bits_per_symbol = 4;
            const double scale = 1.0 / std::sqrt(10.0);
            for (unsigned k = 0; k < 16; ++k) {
                const double re = qam16_level((k >> 3) & 1u, (k >> 2) & 1u);
                const double im = qam16_level((k >> 1) & 1u, k & 1u);
                c.points.emplace_back(re * scale, im * scale);
            }
            break;
        }
    }
    return c;
}

unsigned Constellation::bit_errors(unsigned a, unsigned b) const {
    return static_cast<unsigned>(std::popcount(a ^ b));
}

std::vector<unsigned> bits_to_indices(std::span<const std::uint8_t> bits, const Constellation& c) {
    if (bits.size() % c.bits_per_symbol != 0)
        throw std::invalid_argument("map_bits: bit count not divisible by bits per symbol");
    std::vector<unsigned> idx(bits.size() / c.bits_per_symbol);
    for (std::size_t s = 0; s < idx.size(); ++s) {
        unsigned v = 0;
        for (unsigned b = 0; b < c.bits_per_symbol; ++b) v = (v << 1) | (bits[s * c.bits_per_symbol + b] & 1u);
        idx[s] = v;
    }
    return idx;
}

CVector map_bits(std::span<const std::uint8_t> bits, const Constellation& c) {
    const auto idx = bits_to_indices(bits, c);
    CVector out(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) out[k] = c.points[idx[k]];
    return out;
}

std::vector<std::uint8_t> demap_symbols(std::span<const unsigned> indices, const Constellation& c) {
    std::vector<std::uint8_t> bits;
    bits.reserve(indices.size() * c.bits_per_symbol);
    for (unsigned v : indices) {
        if (v >= c.order()) throw std::invalid_argument("demap_symbols: index outside constellation");
        for (unsigned b = c.bits_per_symbol; b-- > 0;) bits.push_back(static_cast<std::uint8_t>((v >> b) & 1u));
    }
    return bits;
}

std::vector<unsigned> slice(std::span<const cplx> soft, const Constellation& c) {
    std::vector<unsigned> out(soft.size());
    for (std::size_t k = 0; k < soft.size(); ++k) {
        unsigned best = 0;
        double best_d = abs2(soft[k] - c.points[0]);
        for (unsigned m = 1; m < c.order(); ++m) {
            const double d = abs2(soft[k] - c.points[m]);
            if (d < best_d) {
                best_d = d;
                best = m;
            }
        }
        out[k] = best;
    }
    return out;
}

}  // namespace zpafdm
