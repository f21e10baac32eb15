#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace eegprompt {

enum class ModalityKind { EegImage, FaceImage, AudioFeatureText, TranscriptText };

bool is_image_kind(ModalityKind kind);
std::string to_string(ModalityKind kind);
ModalityKind parse_modality_kind(const std::string& s);

// One modality of one sample, as presented to the model.
struct ModalityDescriptor {
  ModalityKind kind = ModalityKind::EegImage;
  std::string name;                // the "<MOD>" placeholder, e.g. "EEG"
  std::string collection_desc;     // "collected through ..."
  std::string visualization_desc;  // "visualized in ... form"
  std::vector<std::uint8_t> image; // PNG/JPEG bytes for image kinds
  // Further attachments sent after `image` under the same sentence.
  std::vector<std::vector<std::uint8_t>> extra_images;
  std::string mime_type = "image/png";
  std::string text;                // payload for text kinds

  // Standard wording for each kind; payload left empty.
  static ModalityDescriptor standard(ModalityKind kind);
  static ModalityDescriptor eeg_image(std::vector<std::uint8_t> png);
  static ModalityDescriptor face_image(std::vector<std::uint8_t> bytes, std::string mime = "image/png");
  static ModalityDescriptor audio_features(std::string text);
  static ModalityDescriptor transcript(std::string text);

  // Throws ParameterError when the payload does not match the kind.
  void validate() const;
};

struct ClassLabel {
  int index = 0;
  std::string name;
  std::string description;  // the "0 denotes ..." text; defaults to name
};

struct TaskSpec {
  std::string symptom;
  std::vector<ClassLabel> classes;

  std::size_t size() const { return classes.size(); }
  // Indices 0..C-1 in order, unique names, at least 2 classes.
  void validate() const;
};

struct ShotExample {
  std::vector<ModalityDescriptor> modalities;
  int true_label = 0;
};

enum class PartKind { Text, Image };
enum class Section { RolePlay, Example, Query, Instruction, Rule };

struct PromptPart {
  PartKind kind = PartKind::Text;
  Section section = Section::Query;
  std::string text;
  std::vector<std::uint8_t> image;
  std::string mime_type;
  // Set on the sentence that introduces a modality.
  std::optional<ModalityKind> modality;

  bool operator==(const PromptPart&) const = default;
};

struct AssembledPrompt {
  std::vector<PromptPart> parts;

  std::size_t image_count() const;
  // FNV-1a over kinds, text and image bytes in order.
  std::uint64_t checksum() const;
  bool operator==(const AssembledPrompt&) const = default;
};

struct PromptOptions {
  // Reproduce the original template byte-for-byte, including its doubled
  // "expert expert" and the "The below is ..." modality list.
  bool verbatim_paper_prompt = false;
};

inline constexpr const char* kRolePlay =
    "Imagine you are a mental health expert at analyzing the emotion and mental health status.";
inline constexpr const char* kRolePlayVerbatim =
    "Imagine you are a mental health expert expert at analyzing the emotion and mental health status.";
inline constexpr const char* kRule = "[Rule]: Do not output other text.";

// "0 denotes healthy, 1 denotes MDD."
std::string class_label_block(const TaskSpec& task);
// "<name> data is collected through <collection> and visualized in <vis> form."
std::string modality_sentence(const ModalityDescriptor& m);

// role-play, one sentence (plus payload) per modality, the analysis
// instruction with the label block, then the rule.
AssembledPrompt build_zero_shot(const std::vector<ModalityDescriptor>& modalities, const TaskSpec& task,
                                const PromptOptions& options = {});

// Inserts one "Example:" block per shot after the role-play sentence, ahead
// of the query content. No shots yields `base` unchanged.
AssembledPrompt build_few_shot(const AssembledPrompt& base, const std::vector<ShotExample>& shots,
                               const TaskSpec& task);

// Human-readable dump: text inline, images as "[image: <ref>]" lines.
// `refs` names each image attachment in order; missing entries fall back
// to "<mime>, <n> bytes".
std::string render_dry_run(const AssembledPrompt& prompt, const std::vector<std::string>& refs = {});

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 14695981039346656037ull);

}  // namespace eegprompt
