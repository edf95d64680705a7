"""Innovation-adaptive homotopy guidance for low-thrust CW rendezvous."""
