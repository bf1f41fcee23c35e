#pragma once

// Generation, judging and administration prompt templates. Placeholders
// are written {name} and filled with fill_template.

#include "psteer/core.hpp"

#include <array>
#include <map>
#include <string>

namespace psteer::prompts {

// Statement synthesis; {phrase}, {verb} ("identify" or "not identify").
extern const std::string kStatementSystem;
extern const std::string kStatementUser;

// Head quality judge; {instruction}, {response}, {rubric}.
extern const std::string kRubricJudgeSystem;
extern const std::string kRubricJudgeUser;
extern const std::string kCoherenceRubric;
inline const std::string kHeadInstruction = "Write a short and realistic sentence.";

// SJT synthesis; {item}, {head}.
extern const std::string kSjtGenerationSystem;
extern const std::string kSjtGenerationUser;

// SJT response judge; {construct}, {characteristics}, {situation}, {response}.
extern const std::string kJudgeSystem;
extern const std::string kJudgeUser;

// Administration; {description}, {item}.
extern const std::string kInventorySystem;
extern const std::string kInventoryUser;
extern const std::string kSjtSystem;
inline const std::string kSjtPrefill = "I would";

/// Persona descriptions in trait order O, C, E, A, N; up before down.
extern const std::array<std::string, 10> kPersonaDescriptions;

/// Persona description for an OCEAN trait id; throws ConfigError for others.
const std::string& persona_description(const std::string& trait, Direction d);

/// Replaces every {key}. Throws ContractViolation when a placeholder is left unfilled.
std::string fill_template(const std::string& tmpl, const std::map<std::string, std::string>& values);

/// Drops the first line ({description}) of an administration system template.
std::string without_description(const std::string& tmpl);

/// "a, b, and c" (Oxford comma); "a and b" for two.
std::string join_list(const std::vector<std::string>& items);

}  // namespace psteer::prompts
