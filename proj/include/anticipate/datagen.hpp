#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "anticipate/seq2seq.hpp"
#include "anticipate/tensor.hpp"

namespace anticipate {

struct ActionClass {
  std::string name;
  int min_frames = 1;
  int max_frames = 1;
};

// One position in a task scaffold: a set of allowed classes and the
// probability that the slot appears at all (1.0 = required).
struct Slot {
  std::vector<int> allowed;
  double include_prob = 1.0;
};

struct Task {
  std::string name;
  std::vector<Slot> slots;
};

// Class `action` may appear only if `precursor` appeared earlier.
struct PrecursorRule {
  int action = -1;
  int precursor = -1;
};

// Pins the cosine between the prototypes of classes a and b, making them
// hard to tell apart at frame level.
struct ConfusablePair {
  int a = -1;
  int b = -1;
  double cosine = 0.0;
};

// Frames before an occurrence of `cls` carry a weak additive signature.
// The signature does not change any frame label, so it only matters for
// predicting whether `cls` is coming.
struct IntentCue {
  int cls = -1;
  double strength = 0.0;
};

struct Grammar {
  int feature_dim = 16;
  double sigma = 0.5;
  // strength of the within-segment progress ramp; frame labels are constant
  // inside a segment, so only boundary prediction benefits from it
  double progress = 0.0;
  std::vector<ActionClass> classes;
  std::vector<Task> tasks;
  std::vector<PrecursorRule> rules;
  std::vector<ConfusablePair> confusable;
  std::vector<IntentCue> cues;

  int num_classes() const { return static_cast<int>(classes.size()); }
  int class_index(const std::string& name) const;
  void validate() const;
};

// The built-in benchmark grammar: 12 classes, 4 tasks, D=16, T in [80,160],
// with a task pair (pancake/batter) whose futures diverge on one early
// precursor action (pour_oil).
Grammar default_grammar();

Grammar parse_grammar(const std::string& path);
void write_grammar(const std::string& path, const Grammar& g);

struct Segment {
  int label = -1;
  int start = 0;  // inclusive
  int end = 0;    // exclusive
};

struct VideoSample {
  std::string id;
  int task_id = -1;
  Tensor features;  // D x T
  std::vector<int> frame_labels;
  std::vector<Segment> segments;

  int num_frames() const { return static_cast<int>(frame_labels.size()); }
};

// Fixed seeded unit prototype per class, independent of video seeds.
std::vector<std::vector<double>> class_prototypes(const Grammar& g);

// Fixed seeded unit direction for a class's intent cue.
std::vector<double> cue_direction(const Grammar& g, int cls);

// Fixed seeded unit direction of the within-segment progress ramp.
std::vector<double> progress_direction(const Grammar& g);

// Deterministic given (grammar, task_id, seed). Every instantiation
// satisfies all precursor rules.
VideoSample sample_video(const Grammar& g, int task_id, std::uint64_t seed);

struct TrainExample {
  Tensor obs_features;  // D x t_o
  std::vector<int> obs_labels;
  SegmentSeq observed;  // ongoing segment included with its observed portion
  SegmentSeq future;    // truncated at the training horizon
  int t_o = 0;
  int horizon_frames = 0;
};

// Splits at t_o = round(alpha * T); the horizon is round(0.5 * T) frames.
TrainExample make_train_example(const VideoSample& v, double alpha);
std::vector<TrainExample> make_train_examples(const VideoSample& v,
                                              const std::vector<double>& obs_fracs = {0.2, 0.3});

int round_half_up(double x);

// On-disk dataset layout:
//   <id>.feat  : magic "FEAT", u32 D, u32 T, f32 frame-major data (LE)
//   <id>.txt   : one action name per line, T lines
//   mapping.txt: "<int id> <action name>" per class
//   splits/train.txt, splits/test.txt: one video id per line
void write_features(const std::string& path, const Tensor& features);
Tensor read_features(const std::string& path);

struct Dataset {
  std::vector<std::string> class_names;
  int feature_dim = 0;
  std::vector<VideoSample> videos;  // all videos, train then test order
  std::vector<std::string> train_ids, test_ids;

  int num_classes() const { return static_cast<int>(class_names.size()); }
  const VideoSample& find(const std::string& id) const;
};

void write_dataset(const std::vector<VideoSample>& videos,
                   const std::vector<std::string>& train_ids,
                   const std::vector<std::string>& test_ids,
                   const std::vector<std::string>& class_names,
                   const std::string& out_dir);
Dataset load_dataset(const std::string& dir);

// Round-robin task assignment, every fifth video goes to the test split.
struct GeneratedDataset {
  std::vector<VideoSample> videos;
  std::vector<std::string> train_ids, test_ids;
};
GeneratedDataset generate_dataset(const Grammar& g, int num_videos, std::uint64_t seed);

}  // namespace anticipate
