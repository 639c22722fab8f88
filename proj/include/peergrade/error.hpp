#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace peergrade {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: bad values, parse failures, violated type invariants.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// The input is well formed but a domain rule forbids the operation.
class DomainError : public Error {
public:
    using Error::Error;
};

class EmptyMessageSet : public DomainError {
public:
    EmptyMessageSet() : DomainError("message set is empty") {}
};

class EmptyInput : public DomainError {
public:
    using DomainError::DomainError;
};

class MissingItem : public DomainError {
public:
    explicit MissingItem(const std::string& id) : DomainError("unknown item: " + id), item_id(id) {}
    std::string item_id;
};

class GraphNotAdmissible : public DomainError {
public:
    GraphNotAdmissible(const std::string& what, std::vector<std::string> nodes)
        : DomainError(what), nodes(std::move(nodes)) {}
    std::vector<std::string> nodes;
};

class UngradedItem : public DomainError {
public:
    explicit UngradedItem(std::vector<std::string> items);
    std::vector<std::string> items;
};

class DegenerateVector : public DomainError {
public:
    using DomainError::DomainError;
};

class NoGrades : public DomainError {
public:
    explicit NoGrades(const std::string& user) : DomainError("user has no grades: " + user) {}
};

class NotEnoughAnchors : public DomainError {
public:
    NotEnoughAnchors() : DomainError("at least two anchor points are required") {}
};

class InvalidAnchors : public DomainError {
public:
    using DomainError::DomainError;
};

class InfeasibleConfig : public DomainError {
public:
    using DomainError::DomainError;
};

class InvalidTransition : public DomainError {
public:
    using DomainError::DomainError;
};

class MissingReason : public DomainError {
public:
    MissingReason() : DomainError("a declined review requires a non-empty reason") {}
};

class NoEligibleSubmission : public DomainError {
public:
    explicit NoEligibleSubmission(const std::string& user)
        : DomainError("no eligible submission for user " + user) {}
};

}  // namespace peergrade
