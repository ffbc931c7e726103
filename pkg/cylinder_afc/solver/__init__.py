# Flow solver and jet actuation
