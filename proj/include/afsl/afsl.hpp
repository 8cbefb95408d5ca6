#pragma once

#include "afsl/dataset.hpp"
#include "afsl/experiment.hpp"
#include "afsl/kmeans.hpp"
#include "afsl/matrix.hpp"
#include "afsl/metrics.hpp"
#include "afsl/protocol.hpp"
#include "afsl/rng.hpp"
#include "afsl/samplers.hpp"
#include "afsl/scoring.hpp"
#include "afsl/synthetic.hpp"
#include "afsl/trainer.hpp"
