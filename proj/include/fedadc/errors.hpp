#pragma once

#include <stdexcept>
#include <string>

namespace fedadc {

// Invalid or inconsistent configuration (bad keys, shape mismatches, out-of-range
// hyperparameters). Maps to CLI exit code 1.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed runtime inputs (out-of-range label, empty update list, invalid
// probability vector).
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// A partitioner could not satisfy its postconditions (e.g. empty-shard retries
// exhausted).
struct PartitionError : std::runtime_error {
    explicit PartitionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Class-cover client selection could not produce a covering subset.
struct SelectionError : std::runtime_error {
    explicit SelectionError(const std::string& msg) : std::runtime_error(msg) {}
};

// A client produced a non-finite gradient. Carries round and client id in the
// message; maps to CLI exit code 2.
struct DivergedClientError : std::runtime_error {
    DivergedClientError(int round, int client_id, const std::string& detail)
        : std::runtime_error("client " + std::to_string(client_id) + " diverged at round " +
                             std::to_string(round) + ": " + detail),
          round(round),
          client_id(client_id) {}
    int round;
    int client_id;
};

// Filesystem failures while emitting results. Maps to CLI exit code 3.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fedadc
