#pragma once

#include <stdexcept>
#include <string>

namespace gradmix {

/// Forward/backward pass produced a non-finite value.
class NumericOverflowError : public std::runtime_error {
public:
    explicit NumericOverflowError(const std::string& what) : std::runtime_error(what) {}
};

/// Nonnegative QP solver exhausted its iteration budget.
class QpConvergenceError : public std::runtime_error {
public:
    QpConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

/// Base for IDX ingestion failures; concrete subclasses let callers
/// distinguish header, length and pairing problems.
class IdxError : public std::runtime_error {
public:
    explicit IdxError(const std::string& what) : std::runtime_error(what) {}
};

class IdxBadMagicError : public IdxError {
public:
    IdxBadMagicError(const std::string& path, unsigned expected, unsigned got)
        : IdxError(path + ": bad IDX magic, expected " + std::to_string(expected) +
                   ", got " + std::to_string(got)) {}
};

class IdxTruncatedError : public IdxError {
public:
    IdxTruncatedError(const std::string& path, std::size_t byte_offset)
        : IdxError(path + ": truncated at byte " + std::to_string(byte_offset)),
          byte_offset_(byte_offset) {}
    std::size_t byte_offset() const { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

class IdxCountMismatchError : public IdxError {
public:
    IdxCountMismatchError(std::size_t images, std::size_t labels)
        : IdxError("image/label count mismatch: " + std::to_string(images) +
                   " images vs " + std::to_string(labels) + " labels") {}
};

/// Requested metric is not defined for the given inputs (e.g. forgetting at k < 2).
class UndefinedMetricError : public std::logic_error {
public:
    explicit UndefinedMetricError(const std::string& what) : std::logic_error(what) {}
};

/// An accuracy-matrix query referenced entries that were never recorded.
class MissingEntriesError : public std::runtime_error {
public:
    explicit MissingEntriesError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gradmix
