#include "eegprompt/prompt.hpp"

#include "eegprompt/error.hpp"

#include <set>

namespace eegprompt {

bool is_image_kind(ModalityKind kind) { return kind == ModalityKind::EegImage || kind == ModalityKind::FaceImage; }

std::string to_string(ModalityKind kind) {
  switch (kind) {
    case ModalityKind::EegImage: return "eeg-image";
    case ModalityKind::FaceImage: return "face-image";
    case ModalityKind::AudioFeatureText: return "audio-feature-text";
    case ModalityKind::TranscriptText: return "transcript-text";
  }
  return "unknown";
}

ModalityKind parse_modality_kind(const std::string& s) {
  for (auto k : {ModalityKind::EegImage, ModalityKind::FaceImage, ModalityKind::AudioFeatureText,
                 ModalityKind::TranscriptText})
    if (to_string(k) == s) return k;
  throw ParameterError("unknown modality kind '" + s + "'");
}

ModalityDescriptor ModalityDescriptor::standard(ModalityKind kind) {
  ModalityDescriptor d;
  d.kind = kind;
  switch (kind) {
    case ModalityKind::EegImage:
      d.name = "EEG";
      d.collection_desc = "scalp electrodes in the standard 10-20 layout";
      d.visualization_desc = "topographic map";
      break;
    case ModalityKind::FaceImage:
      d.name = "Facial expression";
      d.collection_desc = "a video camera recording";
      d.visualization_desc = "image";
      break;
    case ModalityKind::AudioFeatureText:
      d.name = "Audio feature";
      d.collection_desc = "a microphone recording summarized as MFCC, mel spectrogram and chroma statistics";
      d.visualization_desc = "text";
      break;
    case ModalityKind::TranscriptText:
      d.name = "Audio transcript";
      d.collection_desc = "automatic speech recognition of the microphone recording";
      d.visualization_desc = "text";
      break;
  }
  return d;
}

ModalityDescriptor ModalityDescriptor::eeg_image(std::vector<std::uint8_t> png) {
  auto d = standard(ModalityKind::EegImage);
  d.image = std::move(png);
  return d;
}

ModalityDescriptor ModalityDescriptor::face_image(std::vector<std::uint8_t> bytes, std::string mime) {
  auto d = standard(ModalityKind::FaceImage);
  d.image = std::move(bytes);
  d.mime_type = std::move(mime);
  return d;
}

ModalityDescriptor ModalityDescriptor::audio_features(std::string text) {
  auto d = standard(ModalityKind::AudioFeatureText);
  d.text = std::move(text);
  return d;
}

ModalityDescriptor ModalityDescriptor::transcript(std::string text) {
  auto d = standard(ModalityKind::TranscriptText);
  d.text = std::move(text);
  return d;
}

void ModalityDescriptor::validate() const {
  if (is_image_kind(kind)) {
    if (image.empty()) throw ParameterError(to_string(kind) + " modality needs an image payload");
    if (!text.empty()) throw ParameterError(to_string(kind) + " modality must not carry a text payload");
  } else if (!image.empty() || !extra_images.empty()) {
    throw ParameterError(to_string(kind) + " modality must not carry an image payload");
  }
}

void TaskSpec::validate() const {
  if (classes.size() < 2) throw ParameterError("a task needs at least 2 classes");
  std::set<std::string> names;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i].index != static_cast<int>(i))
      throw ParameterError("class indices must be 0..C-1 in order; position " + std::to_string(i) + " has index " +
                           std::to_string(classes[i].index));
    if (!names.insert(classes[i].name).second) throw ParameterError("duplicate class name '" + classes[i].name + "'");
  }
}

std::size_t AssembledPrompt::image_count() const {
  std::size_t n = 0;
  for (const auto& p : parts) n += p.kind == PartKind::Image;
  return n;
}

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
  std::uint64_t h = seed;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t AssembledPrompt::checksum() const {
  std::uint64_t h = fnv1a64(nullptr, 0);
  for (const auto& p : parts) {
    const unsigned char tag = p.kind == PartKind::Text ? 'T' : 'I';
    h = fnv1a64(&tag, 1, h);
    h = fnv1a64(p.text.data(), p.text.size(), h);
    h = fnv1a64(p.image.data(), p.image.size(), h);
  }
  return h;
}

std::string class_label_block(const TaskSpec& task) {
  if (task.classes.size() < 2) throw ParameterError("a label block needs at least 2 classes");
  std::string out;
  for (std::size_t i = 0; i < task.classes.size(); ++i) {
    const auto& c = task.classes[i];
    if (i) out += ", ";
    out += std::to_string(c.index) + " denotes " + (c.description.empty() ? c.name : c.description);
  }
  return out + ".";
}

std::string modality_sentence(const ModalityDescriptor& m) {
  return m.name + " data is collected through " + m.collection_desc + " and visualized in " + m.visualization_desc +
         " form.";
}

namespace {

void append_modality(std::vector<PromptPart>& parts, const ModalityDescriptor& m, Section section) {
  m.validate();
  PromptPart sentence{PartKind::Text, section, modality_sentence(m), {}, {}, m.kind};
  parts.push_back(std::move(sentence));
  if (is_image_kind(m.kind)) {
    parts.push_back({PartKind::Image, section, {}, m.image, m.mime_type, std::nullopt});
    for (const auto& extra : m.extra_images)
      parts.push_back({PartKind::Image, section, {}, extra, m.mime_type, std::nullopt});
  } else
    parts.push_back({PartKind::Text, section, m.text, {}, {}, std::nullopt});
}

std::string modality_list(const std::vector<ModalityDescriptor>& modalities) {
  std::string out;
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    if (i) out += i + 1 == modalities.size() ? " and " : ", ";
    out += modalities[i].name;
  }
  return out;
}

PromptPart text_part(Section section, std::string text) {
  return {PartKind::Text, section, std::move(text), {}, {}, std::nullopt};
}

}  // namespace

AssembledPrompt build_zero_shot(const std::vector<ModalityDescriptor>& modalities, const TaskSpec& task,
                                const PromptOptions& options) {
  if (modalities.empty()) throw ParameterError("a prompt needs at least one modality");
  task.validate();

  AssembledPrompt prompt;
  auto& parts = prompt.parts;
  parts.push_back(text_part(Section::RolePlay, options.verbatim_paper_prompt ? kRolePlayVerbatim : kRolePlay));
  if (options.verbatim_paper_prompt)
    parts.push_back(text_part(Section::Query, "The below is " + modality_list(modalities) + " data."));
  for (const auto& m : modalities) append_modality(parts, m, Section::Query);
  parts.push_back(text_part(Section::Instruction,
                            "Analyze the " + task.symptom + " status of the person. " + class_label_block(task)));
  parts.push_back(text_part(Section::Rule, kRule));
  return prompt;
}

AssembledPrompt build_few_shot(const AssembledPrompt& base, const std::vector<ShotExample>& shots,
                               const TaskSpec& task) {
  task.validate();
  if (shots.empty()) return base;

  std::vector<ModalityKind> query_kinds;
  for (const auto& p : base.parts)
    if (p.section == Section::Query && p.modality) query_kinds.push_back(*p.modality);

  std::vector<PromptPart> examples;
  for (const auto& shot : shots) {
    if (shot.true_label < 0 || static_cast<std::size_t>(shot.true_label) >= task.size())
      throw ParameterError("shot label " + std::to_string(shot.true_label) + " is outside 0.." +
                           std::to_string(task.size() - 1));
    std::vector<ModalityKind> kinds;
    for (const auto& m : shot.modalities) kinds.push_back(m.kind);
    if (kinds != query_kinds) throw ParameterError("shot modalities do not match the query modalities");

    examples.push_back(text_part(Section::Example, "Example:"));
    for (const auto& m : shot.modalities) append_modality(examples, m, Section::Example);
    const auto& label = task.classes[static_cast<std::size_t>(shot.true_label)];
    examples.push_back(text_part(Section::Example, "The correct answer is " + std::to_string(label.index) + " (" +
                                                       label.name + ")."));
  }

  AssembledPrompt out;
  auto it = base.parts.begin();
  while (it != base.parts.end() && it->section == Section::RolePlay) out.parts.push_back(*it++);
  out.parts.insert(out.parts.end(), examples.begin(), examples.end());
  out.parts.insert(out.parts.end(), it, base.parts.end());
  return out;
}

std::string render_dry_run(const AssembledPrompt& prompt, const std::vector<std::string>& refs) {
  std::string out;
  std::size_t image = 0;
  for (const auto& p : prompt.parts) {
    if (p.kind == PartKind::Text) {
      out += p.text;
    } else {
      out += "[image: ";
      out += image < refs.size() ? refs[image] : p.mime_type + ", " + std::to_string(p.image.size()) + " bytes";
      out += "]";
      ++image;
    }
    out += "\n";
  }
  return out;
}

}  // namespace eegprompt
