#pragma once

#include <stdexcept>
#include <string>

namespace hackg {

// Base class for every failure this library reports. Specific subclasses
// exist so callers (and tests) can distinguish failure modes without
// parsing messages.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- tensor engine ---
class ShapeMismatch : public Error { public: using Error::Error; };
class NonScalarLoss : public Error { public: using Error::Error; };
class DoubleBackward : public Error { public: using Error::Error; };
class EmptySegment : public Error { public: using Error::Error; };
class NonFiniteValue : public Error { public: using Error::Error; };
class MissingGradient : public Error { public: using Error::Error; };

// --- knowledge graph ---
class UnknownEntity : public Error { public: using Error::Error; };
class UnknownRelation : public Error { public: using Error::Error; };
class SchemaViolation : public Error { public: using Error::Error; };
class DuplicateStatus : public Error { public: using Error::Error; };
class InsufficientData : public Error { public: using Error::Error; };
class NoCandidates : public Error { public: using Error::Error; };

// --- model / training ---
class WrongLayerCount : public Error { public: using Error::Error; };
class ConfigInvalid : public Error { public: using Error::Error; };

// --- prediction ---
class UnknownProduct : public Error { public: using Error::Error; };
class UnknownIngredient : public Error { public: using Error::Error; };

// --- i/o ---
class IoError : public Error { public: using Error::Error; };
class HeaderMismatch : public Error { public: using Error::Error; };

}  // namespace hackg
