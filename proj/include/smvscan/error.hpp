#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace smvscan {

/// Base class of every error raised by the analyzer.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyInput : public Error {
public:
    EmptyInput() : Error("empty input: no bytes after hex decoding") {}
};

class MalformedHex : public Error {
public:
    explicit MalformedHex(const std::string& why) : Error("malformed hex: " + why) {}
};

class WindowOutOfRange : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class ChecksumMismatch : public Error {
public:
    using Error::Error;
};

class InvalidSymbol : public Error {
public:
    InvalidSymbol(std::string token, std::string record)
        : Error("invalid signature symbol '" + token + "'" +
                (record.empty() ? std::string() : " in record " + record)),
          token_(std::move(token)), record_(std::move(record)) {}

    const std::string& token() const noexcept { return token_; }
    const std::string& record() const noexcept { return record_; }

private:
    std::string token_;
    std::string record_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& reason)
        : Error("line " + std::to_string(line) + ": " + reason), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class DuplicateKey : public Error {
public:
    using Error::Error;
};

class UnknownKind : public Error {
public:
    using Error::Error;
};

class EmptyContractSignature : public Error {
public:
    EmptyContractSignature() : Error("contract method signature is empty") {}
};

class IoFailure : public Error {
public:
    using Error::Error;
};

}  // namespace smvscan
