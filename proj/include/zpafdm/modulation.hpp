#pragma once

#include "zpafdm/numerics.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace zpafdm {

enum class ModulationKind { Bpsk, Qpsk, Qam16 };

std::string to_string(ModulationKind kind);
/// Accepts "bpsk", "qpsk", "16qam" (case-insensitive); throws std::invalid_argument.
ModulationKind parse_modulation(const std::string& name);

/// Gray-labelled constellation with unit average energy. The label of point k is
/// the bit pattern of k, most significant bit first; BPSK maps 0 -> +1, 1 -> -1.
struct Constellation {
    ModulationKind kind;
    unsigned bits_per_symbol;
    std::vector<cplx> points;

    static Constellation make(ModulationKind kind);

    std::size_t order() const { return points.size(); }
    unsigned bit_errors(unsigned a, unsigned b) const;
};

/// Groups bits_per_symbol bits per symbol; throws if the count does not divide.
CVector map_bits(std::span<const std::uint8_t> bits, const Constellation& c);
std::vector<unsigned> bits_to_indices(std::span<const std::uint8_t> bits, const Constellation& c);
std::vector<std::uint8_t> demap_symbols(std::span<const unsigned> indices, const Constellation& c);

/// Nearest constellation point per entry; equidistant ties resolve to the smaller index.
std::vector<unsigned> slice(std::span<const cplx> soft, const Constellation& c);

}  // namespace zpafdm
