#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace imagery {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (mixed grid resolutions,
/// disconnected polycube, invalid loop configuration, ...).
class ContractError : public Error {
public:
    using Error::Error;
};

class SizeError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DecodeError : public Error {
public:
    using Error::Error;
};

/// Raised when a dataset or transcript file is missing or corrupt.
class LoadError : public Error {
public:
    LoadError(std::string file, const std::string& what)
        : Error(file + ": " + what), file_(std::move(file)) {}
    const std::string& file() const noexcept { return file_; }

private:
    std::string file_;
};

class GenerationError : public Error {
public:
    GenerationError(unsigned long long seed, const std::string& what)
        : Error("seed " + std::to_string(seed) + ": " + what), seed_(seed) {}
    unsigned long long seed() const noexcept { return seed_; }

private:
    unsigned long long seed_;
};

enum class ParseErrorKind {
    empty,
    unknown_keyword,
    missing_prefix,
    missing_angle,
    bad_angle,
    unexpected_angle,
};

const char* to_string(ParseErrorKind kind) noexcept;

/// Rejection of a rotation command or command sequence. `index` is the
/// position of the offending command inside its sequence (0 for a
/// standalone command).
class ParseError : public Error {
public:
    ParseError(ParseErrorKind kind, std::string token, std::size_t index = 0);

    ParseErrorKind kind() const noexcept { return kind_; }
    const std::string& token() const noexcept { return token_; }
    std::size_t index() const noexcept { return index_; }

private:
    ParseErrorKind kind_;
    std::string token_;
    std::size_t index_;
};

class NoJsonError : public Error {
public:
    NoJsonError() : Error("no JSON object found in reply") {}
};

/// The reply contained JSON but it does not follow the turn schema. Every
/// offending field is listed.
class SchemaError : public Error {
public:
    explicit SchemaError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    std::vector<std::string> problems_;
};

/// A turn was submitted for an iteration other than the next one.
class IterationMismatchError : public Error {
public:
    IterationMismatchError(int expected, int got)
        : Error("expected iteration " + std::to_string(expected) + ", got " + std::to_string(got)),
          expected_(expected) {}
    int expected() const noexcept { return expected_; }

private:
    int expected_;
};

class TransportError : public Error {
public:
    using Error::Error;
};

/// The agent answered, but even after a repair round-trip the reply could
/// not be parsed. The raw text is kept so the loop can record it.
class MalformedReplyError : public Error {
public:
    MalformedReplyError(std::string raw, const std::string& what)
        : Error(what), raw_(std::move(raw)) {}
    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

}  // namespace imagery
