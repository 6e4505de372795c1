#pragma once

#include "pace/classifier.hpp"
#include "pace/coral.hpp"
#include "pace/ensemble.hpp"
#include "pace/error.hpp"
#include "pace/feature_io.hpp"
#include "pace/linalg.hpp"
#include "pace/optimizer.hpp"
#include "pace/padd.hpp"
#include "pace/pipeline.hpp"
#include "pace/random.hpp"
#include "pace/self_training.hpp"
#include "pace/synthetic.hpp"
