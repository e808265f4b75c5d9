#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rvlm {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid geometric input (degenerate crop, mixed coordinate spaces, bad factor).
class GeometryError : public Error {
public:
    using Error::Error;
};

/// Fewer pseudo labels survived the GIoU threshold than were requested.
class ShortfallError : public Error {
public:
    ShortfallError(std::size_t survivors, std::size_t requested)
        : Error("pseudo-label shortfall: " + std::to_string(survivors) + " of " +
                std::to_string(requested) + " candidates survived the threshold"),
          survivors_(survivors),
          requested_(requested) {}

    std::size_t survivors() const noexcept { return survivors_; }
    std::size_t requested() const noexcept { return requested_; }

private:
    std::size_t survivors_;
    std::size_t requested_;
};

/// Rejection sampling ran out of attempts.
class ExhaustionError : public Error {
public:
    ExhaustionError(std::size_t attempts, double best_giou)
        : Error("perturbation exhausted after " + std::to_string(attempts) +
                " attempts (best giou " + std::to_string(best_giou) + ")"),
          attempts_(attempts),
          best_giou_(best_giou) {}

    std::size_t attempts() const noexcept { return attempts_; }
    double best_giou() const noexcept { return best_giou_; }

private:
    std::size_t attempts_;
    double best_giou_;
};

/// Model output contained no usable coordinate group.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::string text) : Error(what), text_(std::move(text)) {}
    const std::string& text() const noexcept { return text_; }

private:
    std::string text_;
};

/// Backend transport failure (connection, HTTP status, malformed response).
class TransportError : public Error {
public:
    using Error::Error;
};

/// File I/O failure; the message always carries the path.
class IoError : public Error {
public:
    IoError(const std::string& path, const std::string& what)
        : Error(path + ": " + what), path_(path) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Input record or file does not match the expected schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

}  // namespace rvlm
