#pragma once

#include <stdexcept>
#include <string>

namespace una {

// Base class for every typed failure the library reports.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define UNA_DEFINE_ERROR(Name) \
  struct Name : Error {        \
    using Error::Error;        \
  }

// policy
UNA_DEFINE_ERROR(UnknownPrompt);
UNA_DEFINE_ERROR(MalformedResponse);
UNA_DEFINE_ERROR(VocabMismatch);
UNA_DEFINE_ERROR(FrozenPolicy);
UNA_DEFINE_ERROR(DimensionMismatch);
UNA_DEFINE_ERROR(NonFiniteGradient);

// reward
UNA_DEFINE_ERROR(NonFrozenReference);
UNA_DEFINE_ERROR(NonFiniteReward);
UNA_DEFINE_ERROR(NonTrainableModel);
UNA_DEFINE_ERROR(MissingEntry);
UNA_DEFINE_ERROR(OutOfRange);

// losses / trainer
UNA_DEFINE_ERROR(EmptyBatch);
UNA_DEFINE_ERROR(WrongFeedbackKind);
UNA_DEFINE_ERROR(KindMismatch);

// oracle
UNA_DEFINE_ERROR(NonFiniteTilt);
UNA_DEFINE_ERROR(NonPositiveDenominator);
UNA_DEFINE_ERROR(NonPositiveInput);
UNA_DEFINE_ERROR(NonFiniteEvaluation);

// io / cli
UNA_DEFINE_ERROR(ParseError);
UNA_DEFINE_ERROR(SchemaError);
UNA_DEFINE_ERROR(EmptyFile);
UNA_DEFINE_ERROR(MissingArtifact);
UNA_DEFINE_ERROR(CheckpointError);

// invalid arguments / configuration
UNA_DEFINE_ERROR(ValidationError);

#undef UNA_DEFINE_ERROR

}  // namespace una
