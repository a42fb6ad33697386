#pragma once

#include "grssnn/bench.hpp"
#include "grssnn/config.hpp"
#include "grssnn/errors.hpp"
#include "grssnn/experiment.hpp"
#include "grssnn/init.hpp"
#include "grssnn/io.hpp"
#include "grssnn/jacobian.hpp"
#include "grssnn/lti.hpp"
#include "grssnn/lti_estimate.hpp"
#include "grssnn/optim.hpp"
#include "grssnn/params.hpp"
#include "grssnn/random.hpp"
#include "grssnn/serialize.hpp"
#include "grssnn/signal.hpp"
#include "grssnn/ssnn.hpp"
