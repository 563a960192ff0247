#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "frans/network.hpp"

namespace frans {

/// Whitespace-token reader for the text artifact formats. Doubles are stored as C hex-float
/// literals so every value round-trips bit-exactly.
class TokenReader {
public:
    explicit TokenReader(std::istream& in) : in_(in) {}

    std::string next();
    void expect(const std::string& token);
    double next_double();
    std::uint64_t next_uint();
    std::int64_t next_int();

private:
    std::istream& in_;
};

std::string format_double(double v);
void write_tensor(std::ostream& out, const std::string& name, const Tensor& t);
Tensor read_tensor(TokenReader& in, const std::string& name);

/// Versioned text format: layer kinds, hyperparameters, weights and batchnorm running stats.
void write_network(std::ostream& out, const Network& network);
Network read_network(std::istream& in);

}  // namespace frans
