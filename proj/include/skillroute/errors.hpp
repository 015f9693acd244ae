#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace skillroute {

// Base of all library errors. The three direct subclasses map onto the CLI
// exit-code buckets: data errors -> 1, usage errors -> 2, provider errors -> 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

class ProviderError : public Error {
public:
    using Error::Error;
};

// -- registry --------------------------------------------------------------

class MalformedRecord : public DataError {
public:
    MalformedRecord(std::size_t line, const std::string& detail)
        : DataError("malformed record at line " + std::to_string(line) + ": " + detail),
          line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class DuplicateAgentId : public DataError {
public:
    explicit DuplicateAgentId(const std::string& agent_id, const std::string& detail = "")
        : DataError("duplicate agent_id \"" + agent_id + "\"" + (detail.empty() ? "" : " (" + detail + ")")),
          agent_id_(agent_id) {}
    const std::string& agent_id() const noexcept { return agent_id_; }

private:
    std::string agent_id_;
};

class EmptyRegistry : public DataError {
public:
    EmptyRegistry() : DataError("registry contains no agents") {}
    using DataError::DataError;
};

class UnknownAgentId : public DataError {
public:
    explicit UnknownAgentId(const std::string& agent_id)
        : DataError("unknown agent_id \"" + agent_id + "\""), agent_id_(agent_id) {}
    const std::string& agent_id() const noexcept { return agent_id_; }

private:
    std::string agent_id_;
};

class EmptyDescription : public DataError {
public:
    using DataError::DataError;
    EmptyDescription() : DataError("description is empty after whitespace trimming") {}
};

class EmptyDomain : public DataError {
public:
    explicit EmptyDomain(const std::string& domain)
        : DataError("no benign agent carries domain tag \"" + domain + "\"") {}
};

// -- router ------------------------------------------------------------------

class InconsistentStats : public DataError {
public:
    using DataError::DataError;
    InconsistentStats() : DataError("corpus statistics cover zero documents") {}
};

class DimensionMismatch : public DataError {
public:
    DimensionMismatch(std::size_t a, std::size_t b)
        : DataError("embedding dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}
    using DataError::DataError;
};

class ZeroVector : public DataError {
public:
    ZeroVector() : DataError("cosine similarity is undefined for an all-zero vector") {}
};

// -- providers ---------------------------------------------------------------

class ProviderUnreachable : public ProviderError {
public:
    using ProviderError::ProviderError;
};

class ProviderRejected : public ProviderError {
public:
    ProviderRejected(int status, const std::string& body_excerpt)
        : ProviderError("provider rejected request (status " + std::to_string(status) + "): " + body_excerpt),
          status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

class EmptyCompletion : public ProviderError {
public:
    EmptyCompletion() : ProviderError("provider returned an empty completion") {}
    using ProviderError::ProviderError;
};

class DimMismatch : public ProviderError {
public:
    using ProviderError::ProviderError;
};

class UnknownRole : public ProviderError {
public:
    explicit UnknownRole(const std::string& detail)
        : ProviderError("generation request carries no recognized role tag: " + detail) {}
};

// -- attack ------------------------------------------------------------------

class InsufficientDiversity : public ProviderError {
public:
    explicit InsufficientDiversity(std::size_t wanted, std::size_t got)
        : ProviderError("query generator produced only " + std::to_string(got) + " distinct queries, wanted " +
                        std::to_string(wanted)) {}
};

class AllCandidatesInvalid : public ProviderError {
public:
    AllCandidatesInvalid() : ProviderError("every rewrite candidate was empty or over the length cap") {}
};

// -- eval / io ----------------------------------------------------------------

class EmptyRun : public DataError {
public:
    EmptyRun() : DataError("evaluation run contains no rankings") {}
};

class IoFailure : public DataError {
public:
    using DataError::DataError;
};

class MissingRunArtifacts : public DataError {
public:
    using DataError::DataError;
};

} // namespace skillroute
