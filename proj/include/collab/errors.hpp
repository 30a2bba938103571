#pragma once

#include <stdexcept>
#include <string>

namespace collab {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// env
struct NonRectangular : Error { using Error::Error; };
struct UnknownChar : Error { using Error::Error; };
struct MissingStation : Error { using Error::Error; };
struct WrongAgentCount : Error { using Error::Error; };
struct EpisodeOver : Error { using Error::Error; };

// fingerprint
struct EmptyHistory : Error { using Error::Error; };
struct UnknownFeature : Error { using Error::Error; };

// rubric
struct InsufficientSamples : Error { using Error::Error; };

// retrieval
struct DimensionMismatch : Error { using Error::Error; };
struct ZeroVector : Error { using Error::Error; };
struct EmptyDatabase : Error { using Error::Error; };
struct ServiceUnavailable : Error { using Error::Error; };

// classify
struct InvalidBelief : Error { using Error::Error; };
struct DegenerateData : Error { using Error::Error; };

// llm client
struct Timeout : Error { using Error::Error; };
struct HttpError : Error {
    HttpError(int status, const std::string& what) : Error(what), status(status) {}
    int status;
};
struct MissingApiKey : Error { using Error::Error; };
struct DimensionDrift : Error { using Error::Error; };

// cli / config
struct ConfigInvalid : Error { using Error::Error; };
struct MissingArtifact : Error { using Error::Error; };

}  // namespace collab
