#pragma once

#include <map>
#include <string>
#include <vector>

namespace ilr {

// A template body with <<slot>> placeholders. Single braces are literal text
// (the answer-format instruction really contains "boxed{answer}").
struct PromptTemplate {
  std::string name;
  std::string body;
  std::vector<std::string> required_slots;  // unique, in order of first use
};

// Derives required_slots from the body. Unterminated "<<" raises a parse error.
PromptTemplate parse_template(const std::string& name, const std::string& body);

// Substitutes every slot. Missing or unknown slot names raise an
// invalid_argument error naming the slot and the template.
std::string render(const PromptTemplate& tmpl,
                   const std::map<std::string, std::string>& slots);

namespace prompt_names {
inline constexpr const char* ranking_1 = "ranking_1";
inline constexpr const char* ranking_2 = "ranking_2";
inline constexpr const char* ranking_3 = "ranking_3";
inline constexpr const char* ranking_format = "format";
inline constexpr const char* idea_sharing = "idea_sharing";
inline constexpr const char* analysis_cooperation = "analysis_cooperation";
inline constexpr const char* analysis_competition = "analysis_competition";
inline constexpr const char* idea_fusion = "idea_fusion";
inline constexpr const char* debate = "debate";
inline constexpr const char* summarization = "summarization";
}  // namespace prompt_names

// Loads the full template set from a directory of <name>.txt files. All ten
// canonical templates must be present; a single trailing newline per file is
// stripped so editor conventions do not leak into prompt bytes.
class PromptLibrary {
 public:
  static PromptLibrary load(const std::string& dir);
  // Resolution order: explicit argument elsewhere, ILR_PROMPTS_DIR env var,
  // then the compiled-in default (the source tree's prompts/ directory).
  static std::string default_dir();
  static PromptLibrary load_default() { return load(default_dir()); }

  const PromptTemplate& get(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, PromptTemplate> templates_;
};

}  // namespace ilr
