#pragma once

#include <stdexcept>
#include <string>

namespace robostack {

/// Base of every error raised by the library. `kind()` is a stable tag used in
/// logs and CLI diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define ROBOSTACK_DEFINE_ERROR(Name)                                   \
  class Name : public ::robostack::Error {                              \
   public:                                                              \
    explicit Name(const std::string& what) : Error(#Name, what) {}      \
  };

// knowledge base
ROBOSTACK_DEFINE_ERROR(UnknownEntity)
ROBOSTACK_DEFINE_ERROR(UnknownClass)
ROBOSTACK_DEFINE_ERROR(RelationTypeError)
ROBOSTACK_DEFINE_ERROR(OntologyError)
ROBOSTACK_DEFINE_ERROR(DuplicateEntity)
ROBOSTACK_DEFINE_ERROR(NoPlacementLocations)
ROBOSTACK_DEFINE_ERROR(HypothesisNotOpen)
ROBOSTACK_DEFINE_ERROR(UnknownHypothesis)
ROBOSTACK_DEFINE_ERROR(UnknownAssumption)

// command grammar
ROBOSTACK_DEFINE_ERROR(InvalidGrammar)
ROBOSTACK_DEFINE_ERROR(UnknownRoom)
ROBOSTACK_DEFINE_ERROR(UnknownPerson)

// planner
ROBOSTACK_DEFINE_ERROR(NotApplicable)
ROBOSTACK_DEFINE_ERROR(NoPlan)
ROBOSTACK_DEFINE_ERROR(NoCupboard)
ROBOSTACK_DEFINE_ERROR(NotCommitted)

// executor / skills
ROBOSTACK_DEFINE_ERROR(SkillUnavailable)
ROBOSTACK_DEFINE_ERROR(AbortRequested)
ROBOSTACK_DEFINE_ERROR(NotAtLocation)

// hfsm
ROBOSTACK_DEFINE_ERROR(UndeclaredEvent)
ROBOSTACK_DEFINE_ERROR(StepLimitExceeded)
ROBOSTACK_DEFINE_ERROR(InvalidMachine)

// world loading
ROBOSTACK_DEFINE_ERROR(SchemaError)
ROBOSTACK_DEFINE_ERROR(MetricViolation)

// prism
ROBOSTACK_DEFINE_ERROR(DegenerateConfiguration)
ROBOSTACK_DEFINE_ERROR(BehindCamera)
ROBOSTACK_DEFINE_ERROR(SingularHomography)
ROBOSTACK_DEFINE_ERROR(EmptyLabel)

// hallway
ROBOSTACK_DEFINE_ERROR(InvalidSpec)

#undef ROBOSTACK_DEFINE_ERROR

}  // namespace robostack
