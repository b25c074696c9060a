#pragma once

#include "cantids/attackgen.hpp"
#include "cantids/campaign.hpp"
#include "cantids/cycle_model.hpp"
#include "cantids/detectors.hpp"
#include "cantids/evalkit.hpp"
#include "cantids/frame_bits.hpp"
#include "cantids/synth.hpp"
#include "cantids/trace_io.hpp"
#include "cantids/tuning.hpp"
#include "cantids/verdict.hpp"
