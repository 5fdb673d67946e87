#pragma once

// Umbrella header: the full ingest -> enhance -> segment -> detect toolkit.

#include "astroseg/errors.hpp"
#include "astroseg/features.hpp"
#include "astroseg/fits.hpp"
#include "astroseg/image.hpp"
#include "astroseg/metrics.hpp"
#include "astroseg/mlp.hpp"
#include "astroseg/pgm.hpp"
#include "astroseg/pipeline.hpp"
#include "astroseg/preprocess.hpp"
#include "astroseg/rng.hpp"
#include "astroseg/segmentation.hpp"
#include "astroseg/synth.hpp"
