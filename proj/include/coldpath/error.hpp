/*
 * Copyright 2026 The coldpath Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace coldpath {

// Every domain failure derives from Error. The CLI maps Error to exit code 1
// and argument errors to exit code 2.
class Error : public std::runtime_error {
 public:
  Error(const char* kind, const std::string& what)
      : std::runtime_error(std::string(kind) + ": " + what), kind_(kind) {}

  const char* kind() const noexcept { return kind_; }

 private:
  const char* kind_;
};

#define COLDPATH_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(#Name, what) {}    \
  }

// trace-model
COLDPATH_DEFINE_ERROR(MalformedTrace);
COLDPATH_DEFINE_ERROR(IoError);

// cct-builder
COLDPATH_DEFINE_ERROR(InvalidPhase);
COLDPATH_DEFINE_ERROR(UnmatchedImports);

// scorer
COLDPATH_DEFINE_ERROR(EmptyInput);
COLDPATH_DEFINE_ERROR(InvalidWeights);

// localizer-eval
COLDPATH_DEFINE_ERROR(ScenarioMismatch);
COLDPATH_DEFINE_ERROR(UnknownScenarioId);
COLDPATH_DEFINE_ERROR(MalformedVerdicts);

// stats
COLDPATH_DEFINE_ERROR(EmptySample);
COLDPATH_DEFINE_ERROR(AllZeroDiffs);

// bench-harness
COLDPATH_DEFINE_ERROR(MetadataInvalid);
COLDPATH_DEFINE_ERROR(ScenarioTimeout);
COLDPATH_DEFINE_ERROR(RunnerFailure);
COLDPATH_DEFINE_ERROR(InsufficientReps);
COLDPATH_DEFINE_ERROR(ZeroBaseline);

// report-cli
COLDPATH_DEFINE_ERROR(InconsistentInputs);
COLDPATH_DEFINE_ERROR(SchemaMismatch);

#undef COLDPATH_DEFINE_ERROR

}  // namespace coldpath
